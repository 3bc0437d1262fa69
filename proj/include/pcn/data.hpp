#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcn/matrix.hpp"
#include "pcn/network.hpp"
#include "pcn/rng.hpp"

namespace pcn {

// Samples are columns. Inputs lie in [0, 1]; labels, when present, are one-hot.
struct Dataset {
    std::string name;
    Matrix inputs;
    std::optional<Matrix> labels;
    std::vector<std::size_t> classes;  // class index per sample, parallel to labels
    std::size_t image_rows = 0;        // 0 when samples are not images
    std::size_t image_cols = 0;
    std::uint64_t checksum = 0;        // FNV-1a over the source bytes or generator parameters

    std::size_t size() const noexcept { return inputs.cols(); }
    std::size_t features() const noexcept { return inputs.rows(); }
    std::size_t num_classes() const noexcept { return labels ? labels->rows() : 0; }
    bool is_image() const noexcept { return image_rows * image_cols == features() && image_rows > 0; }

    // Throws UsageError if any invariant is violated.
    void validate() const;
};

// Builds a labeled dataset from class indices; `num_classes` fixes the one-hot width.
Dataset make_labeled(std::string name, Matrix inputs, std::span<const std::size_t> classes,
                     std::size_t num_classes);

// Selects samples `idx` in order.
Dataset select(const Dataset& d, std::span<const std::size_t> idx);

// ---- IDX ------------------------------------------------------------------

// Raw IDX tensor (unsigned-byte payload only: magic 0x00000801 or 0x00000803).
struct IdxTensor {
    std::vector<std::uint32_t> shape;
    std::vector<std::uint8_t> data;

    friend bool operator==(const IdxTensor&, const IdxTensor&) = default;
};

// Big-endian header: two zero bytes, type byte 0x08 (ubyte), rank byte, then
// rank u32 sizes, then the payload. Errors carry the byte offset.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_idx(const IdxTensor& t);
IdxTensor read_idx_file(const std::filesystem::path& path);
void write_idx_file(const IdxTensor& t, const std::filesystem::path& path);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Pairs an image file (rank 3) with a label file (rank 1), scaling pixels to [0, 1].
Dataset dataset_from_idx(const IdxTensor& images, const IdxTensor& labels, std::string name,
                         std::size_t num_classes = 10);

// Loads the uncompressed pair "<prefix>-images-idx3-ubyte" and
// "<prefix>-labels-idx1-ubyte" from `dir` (the "<prefix>-images.idx3-ubyte"
// spelling is also accepted); prefix is "train" or "t10k" for MNIST.
Dataset load_idx_dataset(const std::filesystem::path& dir, const std::string& prefix,
                         std::string name);

// Dataset cache root: $PCN_DATA_DIR if set, else "./data".
std::filesystem::path data_dir();

// ---- subsetting -----------------------------------------------------------

// Seeded sample of n items. Stratified sampling draws n / classes from each
// class (remainder to the lowest class ids) and requires labels.
Dataset subset(const Dataset& d, std::size_t n, std::uint64_t seed, bool stratified = false);

// Deterministic split: the first `holdout` samples of a seeded permutation go
// to the second dataset.
std::pair<Dataset, Dataset> split(const Dataset& d, std::size_t holdout, std::uint64_t seed);

// ---- corruptions ----------------------------------------------------------

enum class CorruptionKind { GaussianNoise, GaussianBlur, Rotation, Brightness, Contrast };

std::string to_string(CorruptionKind kind);
CorruptionKind parse_corruption(const std::string& name);
const std::vector<CorruptionKind>& all_corruptions();

struct Corruption {
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int level = 0;            // 0 (identity) .. 5
    std::uint64_t seed = 0;   // used by GaussianNoise only
};

// Parameter per level 1..5 for each kind:
//   noise      standard deviation of additive Gaussian noise
//   blur       Gaussian sigma in pixels (kernel radius ceil(3·sigma))
//   rotation   degrees, counter-clockwise about the image centre
//   brightness additive offset
//   contrast   factor c in 0.5 + c·(x - 0.5)
class CorruptionTable {
public:
    static CorruptionTable defaults();
    // Text format: one "<kind> p1 p2 p3 p4 p5" line per kind; '#' comments.
    static CorruptionTable parse(const std::string& text);
    std::string to_text() const;

    double parameter(CorruptionKind kind, int level) const;
    void set(CorruptionKind kind, std::vector<double> levels);

private:
    std::vector<std::vector<double>> params_;
};

// Applies a corruption at a table level; level 0 returns the input unchanged.
Dataset corrupt(const Dataset& d, const Corruption& c,
                const CorruptionTable& table = CorruptionTable::defaults());
// Applies a corruption with an explicit parameter. Output is clipped to [0, 1].
Dataset corrupt_with_parameter(const Dataset& d, CorruptionKind kind, double parameter,
                               std::uint64_t seed = 0);

// ---- synthetic data -------------------------------------------------------

// Data drawn from a fixed random teacher network with widths `dims`
// (dims[0] = data width, dims.back() = latent width). Latents are standard
// normal, hidden layers equal their noise-free predictions under ReLU, and the
// output weights are nonnegative and rescaled by the largest generated value so
// every sample lies in [0, 1]. The teacher reproduces each sample from its
// latent with zero prediction error.
struct TeacherSample {
    PCNetwork teacher;
    Matrix latents;
    Dataset data;
};

TeacherSample synthetic_teacher(std::size_t n, const std::vector<std::size_t>& dims,
                                std::uint64_t seed);
Dataset synthetic_generative(std::size_t n, const std::vector<std::size_t>& dims,
                             std::uint64_t seed);

// Labeled toy classification set: inputs drawn as in synthetic_generative,
// label = argmax of a fixed random linear readout of the latent.
Dataset synthetic_classification(std::size_t n, const std::vector<std::size_t>& dims,
                                 std::size_t num_classes, std::uint64_t seed);

}  // namespace pcn
