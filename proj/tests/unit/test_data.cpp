#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "pcn/data.hpp"
#include "pcn/errors.hpp"
#include "test_support.hpp"

namespace pcn {
namespace {

IdxTensor tiny_images(std::uint32_t n) {
    IdxTensor t;
    t.shape = {n, 4, 4};
    for (std::uint32_t i = 0; i < n * 16; ++i) t.data.push_back(static_cast<std::uint8_t>((i * 37) % 256));
    return t;
}

IdxTensor tiny_labels(std::uint32_t n, std::uint32_t classes = 10) {
    IdxTensor t;
    t.shape = {n};
    for (std::uint32_t i = 0; i < n; ++i) t.data.push_back(static_cast<std::uint8_t>(i % classes));
    return t;
}

TEST(Idx, RoundTrip) {
    const auto t = tiny_images(3);
    const auto bytes = serialize_idx(t);
    ASSERT_EQ(bytes.size(), 4u + 3 * 4 + 48);
    EXPECT_EQ(bytes[2], 0x08);
    EXPECT_EQ(bytes[3], 3);
    EXPECT_EQ(bytes[7], 3);  // big-endian count
    EXPECT_EQ(parse_idx(bytes), t);
}

TEST(Idx, TruncatedPayloadReportsOffset) {
    auto bytes = serialize_idx(tiny_images(2));
    bytes.pop_back();
    try {
        parse_idx(bytes);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
    auto extra = serialize_idx(tiny_labels(4));
    extra.push_back(0);
    EXPECT_THROW(parse_idx(extra), ParseError);
    EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0}), ParseError);
    EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0, 0x0d, 1, 0, 0, 0, 0}), ParseError);
}

TEST(Idx, DatasetFromFilesScalesPixels) {
    const auto dir = std::filesystem::temp_directory_path() / "pcn_idx_test";
    std::filesystem::create_directories(dir);
    write_idx_file(tiny_images(10), dir / "train-images-idx3-ubyte");
    write_idx_file(tiny_labels(10), dir / "train-labels.idx1-ubyte");
    const Dataset d = load_idx_dataset(dir, "train", "tiny");
    EXPECT_EQ(d.size(), 10u);
    EXPECT_EQ(d.features(), 16u);
    EXPECT_TRUE(d.is_image());
    EXPECT_DOUBLE_EQ(d.inputs(1, 0), 37.0 / 255.0);
    EXPECT_EQ(d.classes[3], 3u);
    EXPECT_EQ((*d.labels)(3, 3), 1.0);
    EXPECT_NE(d.checksum, 0u);
    EXPECT_THROW(load_idx_dataset(dir, "missing", "x"), UsageError);
    std::filesystem::remove_all(dir);
}

Dataset tiny_dataset(std::uint32_t n, std::uint32_t classes = 10) {
    return dataset_from_idx(tiny_images(n), tiny_labels(n, classes), "tiny", 10);
}

TEST(Subset, StratifiedHasEqualClassCounts) {
    const Dataset d = tiny_dataset(200);
    const Dataset s = subset(d, 50, 3, true);
    std::map<std::size_t, int> count;
    for (auto c : s.classes) ++count[c];
    EXPECT_EQ(count.size(), 10u);
    for (auto [c, k] : count) EXPECT_EQ(k, 5);
    EXPECT_EQ(subset(d, 50, 3, true).inputs, s.inputs);
    EXPECT_THROW(subset(d, 201, 0), UsageError);
}

TEST(Split, PartitionsSamples) {
    const Dataset d = tiny_dataset(30);
    const auto [kept, held] = split(d, 7, 1);
    EXPECT_EQ(kept.size(), 23u);
    EXPECT_EQ(held.size(), 7u);
}

TEST(Corruption, LevelZeroIsIdentity) {
    const Dataset d = tiny_dataset(5);
    for (auto k : all_corruptions()) EXPECT_EQ(corrupt(d, {k, 0, 1}).inputs, d.inputs);
}

TEST(Corruption, OutputsClippedToUnitInterval) {
    const Dataset d = tiny_dataset(20);
    for (auto k : all_corruptions())
        for (int level = 1; level <= 5; ++level)
            for (double v : corrupt(d, {k, level, 2}).inputs.data()) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
}

TEST(Corruption, BrightnessInversePair) {
    Dataset d = tiny_dataset(4);
    for (double& v : d.inputs.data()) v = 0.3 + 0.4 * v;  // keep clear of the clip region
    const Dataset back =
        corrupt_with_parameter(corrupt_with_parameter(d, CorruptionKind::Brightness, 0.2), CorruptionKind::Brightness, -0.2);
    EXPECT_LE(max_abs_diff(back.inputs, d.inputs), 1e-12);
}

TEST(Corruption, GaussianNoiseHasRequestedStd) {
    Dataset d = tiny_dataset(20);
    d.image_rows = 28;
    d.image_cols = 28;
    d.inputs = Matrix(784, 400, 0.5);
    const Dataset c = corrupt_with_parameter(d, CorruptionKind::GaussianNoise, 0.1, 7);
    double s = 0, s2 = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
        const double v = c.inputs.data()[i];
        if (v <= 0.0 || v >= 1.0) continue;
        const double diff = v - 0.5;
        s += diff;
        s2 += diff * diff;
        ++n;
    }
    const double mean = s / n;
    EXPECT_NEAR(std::sqrt(s2 / n - mean * mean), 0.1, 0.005);
}

TEST(Corruption, BlurKeepsConstantImagesAndRotationKeepsCentre) {
    Dataset d = tiny_dataset(2);
    d.inputs = Matrix(16, 2, 0.6);
    EXPECT_LE(max_abs_diff(corrupt_with_parameter(d, CorruptionKind::GaussianBlur, 1.5).inputs, d.inputs), 1e-12);
    Dataset r = tiny_dataset(1);
    EXPECT_EQ(corrupt_with_parameter(r, CorruptionKind::Rotation, 360.0).inputs, r.inputs);
}

TEST(Corruption, ContrastAboutHalf) {
    Dataset d = tiny_dataset(1);
    const Dataset c = corrupt_with_parameter(d, CorruptionKind::Contrast, 0.5);
    for (std::size_t i = 0; i < d.inputs.size(); ++i)
        EXPECT_DOUBLE_EQ(c.inputs.data()[i], 0.5 + 0.5 * (d.inputs.data()[i] - 0.5));
}

TEST(CorruptionTable, TextRoundTripAndErrors) {
    const auto t = CorruptionTable::defaults();
    const auto back = CorruptionTable::parse(t.to_text());
    for (auto k : all_corruptions())
        for (int level = 1; level <= 5; ++level) EXPECT_EQ(back.parameter(k, level), t.parameter(k, level));
    EXPECT_THROW(CorruptionTable::parse("rotation 1 2 3"), ConfigError);
    EXPECT_THROW(CorruptionTable::parse("hue 1 2 3 4 5"), ConfigError);
    EXPECT_THROW(parse_corruption("hue"), ConfigError);
}

TEST(Corruption, NonImageDataIsRejected) {
    const Dataset d = synthetic_generative(4, {5, 3}, 1);
    EXPECT_THROW(corrupt(d, {CorruptionKind::Rotation, 1, 0}), UsageError);
}

TEST(Synthetic, TeacherReproducesDataWithZeroEnergy) {
    const auto t = synthetic_teacher(30, {12, 8, 4}, 3);
    for (double v : t.data.inputs.data()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
    auto s = feedforward_init(t.teacher, t.latents);
    s = compute_errors(t.teacher, clamp(s, Mode::Generative, t.data.inputs));
    EXPECT_LE(energy(s), 1e-20);
}

TEST(Synthetic, ClassificationIsDeterministicAndLabeled) {
    const auto a = synthetic_classification(50, {6, 4}, 3, 9);
    const auto b = synthetic_classification(50, {6, 4}, 3, 9);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.classes, b.classes);
    EXPECT_EQ(a.num_classes(), 3u);
    EXPECT_NO_THROW(a.validate());
}

}  // namespace
}  // namespace pcn
