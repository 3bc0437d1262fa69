#include "pcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "pcn/errors.hpp"

namespace pcn {

namespace {

constexpr std::uint8_t kUbyte = 0x08;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
           (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void require_image(const Dataset& d, const char* op) {
    if (!d.is_image()) throw UsageError(std::string(op) + ": dataset '" + d.name + "' is not image-shaped");
}

std::size_t kind_index(CorruptionKind k) { return static_cast<std::size_t>(k); }

Matrix blur_image(std::span<const double> img, std::size_t rows, std::size_t cols, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        total += kernel[i + radius];
    }
    for (double& k : kernel) k /= total;
    auto at = [](int v, std::size_t n) {
        return static_cast<std::size_t>(std::clamp(v, 0, static_cast<int>(n) - 1));
    };
    Matrix tmp(rows, cols), out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k)
                s += kernel[k + radius] * img[r * cols + at(static_cast<int>(c) + k, cols)];
            tmp(r, c) = s;
        }
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k)
                s += kernel[k + radius] * tmp(at(static_cast<int>(r) + k, rows), c);
            out(r, c) = s;
        }
    return out;
}

// Nearest-neighbour inverse mapping; pixels that map outside the source are 0.
Matrix rotate_image(std::span<const double> img, std::size_t rows, std::size_t cols,
                    double degrees) {
    const double th = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    const double cy = (static_cast<double>(rows) - 1.0) / 2.0;
    const double cx = (static_cast<double>(cols) - 1.0) / 2.0;
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
            const double sx = cs * dx - sn * dy + cx;
            const double sy = sn * dx + cs * dy + cy;
            const long ix = std::lround(sx), iy = std::lround(sy);
            if (ix >= 0 && iy >= 0 && ix < static_cast<long>(cols) && iy < static_cast<long>(rows))
                out(r, c) = img[static_cast<std::size_t>(iy) * cols + static_cast<std::size_t>(ix)];
        }
    return out;
}

}  // namespace

void Dataset::validate() const {
    for (double v : inputs.data())
        if (!(v >= 0.0 && v <= 1.0))
            throw UsageError("dataset '" + name + "': input outside [0, 1]");
    if (labels) {
        if (labels->cols() != inputs.cols())
            throw UsageError("dataset '" + name + "': label count does not match sample count");
        if (classes.size() != inputs.cols())
            throw UsageError("dataset '" + name + "': class index count mismatch");
        for (std::size_t j = 0; j < labels->cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < labels->rows(); ++i) {
                const double v = (*labels)(i, j);
                if (v != 0.0 && v != 1.0) throw UsageError("dataset '" + name + "': label not one-hot");
                s += v;
            }
            if (s != 1.0 || (*labels)(classes[j], j) != 1.0)
                throw UsageError("dataset '" + name + "': label not one-hot");
        }
    }
}

Dataset make_labeled(std::string name, Matrix inputs, std::span<const std::size_t> classes,
                     std::size_t num_classes) {
    if (classes.size() != inputs.cols())
        throw UsageError("make_labeled: " + std::to_string(classes.size()) + " labels for " +
                         std::to_string(inputs.cols()) + " samples");
    Dataset d;
    d.name = std::move(name);
    d.inputs = std::move(inputs);
    Matrix onehot(num_classes, classes.size());
    for (std::size_t j = 0; j < classes.size(); ++j) {
        if (classes[j] >= num_classes) throw UsageError("make_labeled: class index out of range");
        onehot(classes[j], j) = 1.0;
    }
    d.labels = std::move(onehot);
    d.classes.assign(classes.begin(), classes.end());
    return d;
}

Dataset select(const Dataset& d, std::span<const std::size_t> idx) {
    Dataset out;
    out.name = d.name;
    out.inputs = gather_columns(d.inputs, idx);
    if (d.labels) {
        out.labels = gather_columns(*d.labels, idx);
        out.classes.reserve(idx.size());
        for (auto i : idx) out.classes.push_back(d.classes[i]);
    }
    out.image_rows = d.image_rows;
    out.image_cols = d.image_cols;
    out.checksum = d.checksum;
    return out;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw ParseError("IDX: truncated header", bytes.size());
    if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("IDX: bad magic", 0);
    if (bytes[2] != kUbyte) throw ParseError("IDX: unsupported element type", 2);
    const std::size_t rank = bytes[3];
    if (rank == 0) throw ParseError("IDX: zero rank", 3);
    const std::size_t header = 4 + 4 * rank;
    if (bytes.size() < header) throw ParseError("IDX: truncated dimension list", bytes.size());
    IdxTensor t;
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        t.shape.push_back(read_be32(bytes, 4 + 4 * i));
        count *= t.shape.back();
    }
    if (bytes.size() < header + count)
        throw ParseError("IDX: truncated payload, expected " + std::to_string(count) + " bytes",
                         bytes.size());
    if (bytes.size() > header + count)
        throw ParseError("IDX: trailing bytes after payload", header + count);
    t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return t;
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& t) {
    std::size_t count = 1;
    for (auto s : t.shape) count *= s;
    if (t.shape.empty() || t.shape.size() > 255 || count != t.data.size())
        throw UsageError("serialize_idx: shape does not match payload");
    std::vector<std::uint8_t> out = {0, 0, kUbyte, static_cast<std::uint8_t>(t.shape.size())};
    for (auto s : t.shape) append_be32(out, s);
    out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

IdxTensor read_idx_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_idx(bytes);
}

void write_idx_file(const IdxTensor& t, const std::filesystem::path& path) {
    const auto bytes = serialize_idx(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Dataset dataset_from_idx(const IdxTensor& images, const IdxTensor& labels, std::string name,
                         std::size_t num_classes) {
    if (images.shape.size() != 3) throw UsageError("dataset_from_idx: images must be rank 3");
    if (labels.shape.size() != 1) throw UsageError("dataset_from_idx: labels must be rank 1");
    const std::size_t n = images.shape[0], rows = images.shape[1], cols = images.shape[2];
    if (labels.shape[0] != n) throw UsageError("dataset_from_idx: image/label count mismatch");
    const std::size_t features = rows * cols;
    Matrix inputs(features, n);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t p = 0; p < features; ++p)
            inputs(p, s) = images.data[s * features + p] / 255.0;
    std::vector<std::size_t> classes(labels.data.begin(), labels.data.end());
    Dataset d = make_labeled(std::move(name), std::move(inputs), classes, num_classes);
    d.image_rows = rows;
    d.image_cols = cols;
    d.checksum = fnv1a(labels.data, fnv1a(images.data));
    return d;
}

Dataset load_idx_dataset(const std::filesystem::path& dir, const std::string& prefix,
                         std::string name) {
    auto pick = [&](const std::string& a, const std::string& b) {
        const auto pa = dir / a;
        if (std::filesystem::exists(pa)) return pa;
        const auto pb = dir / b;
        if (std::filesystem::exists(pb)) return pb;
        throw UsageError("dataset file '" + pa.string() + "' not found");
    };
    const auto images = read_idx_file(pick(prefix + "-images-idx3-ubyte", prefix + "-images.idx3-ubyte"));
    const auto labels = read_idx_file(pick(prefix + "-labels-idx1-ubyte", prefix + "-labels.idx1-ubyte"));
    return dataset_from_idx(images, labels, std::move(name));
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("PCN_DATA_DIR"); env && *env) return env;
    return "data";
}

Dataset subset(const Dataset& d, std::size_t n, std::uint64_t seed, bool stratified) {
    if (n > d.size())
        throw UsageError("subset: requested " + std::to_string(n) + " of " +
                         std::to_string(d.size()) + " samples");
    Rng rng(seed);
    auto perm = rng.permutation(d.size());
    if (!stratified) {
        perm.resize(n);
        return select(d, perm);
    }
    if (!d.labels) throw UsageError("subset: stratified sampling needs labels");
    const std::size_t k = d.num_classes();
    std::vector<std::size_t> quota(k, n / k);
    for (std::size_t c = 0; c < n % k; ++c) ++quota[c];
    std::vector<std::size_t> picked;
    picked.reserve(n);
    for (auto i : perm) {
        auto& q = quota[d.classes[i]];
        if (q > 0) {
            --q;
            picked.push_back(i);
        }
    }
    if (picked.size() != n) throw UsageError("subset: not enough samples per class for stratification");
    return select(d, picked);
}

std::pair<Dataset, Dataset> split(const Dataset& d, std::size_t holdout, std::uint64_t seed) {
    if (holdout > d.size()) throw UsageError("split: holdout larger than dataset");
    Rng rng(seed);
    const auto perm = rng.permutation(d.size());
    const std::vector<std::size_t> held(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(holdout));
    const std::vector<std::size_t> kept(perm.begin() + static_cast<std::ptrdiff_t>(holdout), perm.end());
    return {select(d, kept), select(d, held)};
}

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::GaussianBlur: return "gaussian_blur";
        case CorruptionKind::Rotation: return "rotation";
        case CorruptionKind::Brightness: return "brightness";
        case CorruptionKind::Contrast: return "contrast";
    }
    return "unknown";
}

CorruptionKind parse_corruption(const std::string& name) {
    for (auto k : all_corruptions())
        if (to_string(k) == name) return k;
    throw ConfigError("unknown corruption '" + name + "'");
}

const std::vector<CorruptionKind>& all_corruptions() {
    static const std::vector<CorruptionKind> kinds = {
        CorruptionKind::GaussianNoise, CorruptionKind::GaussianBlur, CorruptionKind::Rotation,
        CorruptionKind::Brightness, CorruptionKind::Contrast};
    return kinds;
}

CorruptionTable CorruptionTable::defaults() {
    CorruptionTable t;
    t.params_.resize(all_corruptions().size());
    t.set(CorruptionKind::GaussianNoise, {0.1, 0.2, 0.35, 0.5, 0.7});
    t.set(CorruptionKind::GaussianBlur, {0.6, 1.0, 1.5, 2.2, 3.0});
    t.set(CorruptionKind::Rotation, {15, 30, 50, 75, 110});
    t.set(CorruptionKind::Brightness, {0.15, 0.3, 0.45, 0.6, 0.8});
    t.set(CorruptionKind::Contrast, {0.7, 0.5, 0.35, 0.2, 0.08});
    return t;
}

CorruptionTable CorruptionTable::parse(const std::string& text) {
    CorruptionTable t = defaults();
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string name;
        if (!(fields >> name)) continue;
        std::vector<double> values;
        double v;
        while (fields >> v) values.push_back(v);
        if (!fields.eof())
            throw ConfigError("corruption table line " + std::to_string(lineno) + ": bad number");
        if (values.size() != 5)
            throw ConfigError("corruption table line " + std::to_string(lineno) +
                              ": expected 5 levels");
        t.set(parse_corruption(name), std::move(values));
    }
    return t;
}

std::string CorruptionTable::to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "# kind level1 level2 level3 level4 level5\n";
    for (auto k : all_corruptions()) {
        out << to_string(k);
        for (double v : params_[kind_index(k)]) out << ' ' << v;
        out << '\n';
    }
    return out.str();
}

double CorruptionTable::parameter(CorruptionKind kind, int level) const {
    if (level < 1 || level > 5) throw UsageError("corruption level must be 1..5");
    return params_[kind_index(kind)][static_cast<std::size_t>(level - 1)];
}

void CorruptionTable::set(CorruptionKind kind, std::vector<double> levels) {
    if (levels.size() != 5) throw ConfigError("corruption table needs 5 levels");
    params_.resize(all_corruptions().size());
    params_[kind_index(kind)] = std::move(levels);
}

Dataset corrupt(const Dataset& d, const Corruption& c, const CorruptionTable& table) {
    if (c.level < 0 || c.level > 5) throw UsageError("corruption level must be 0..5");
    require_image(d, "corrupt");
    if (c.level == 0) return d;
    return corrupt_with_parameter(d, c.kind, table.parameter(c.kind, c.level), c.seed);
}

Dataset corrupt_with_parameter(const Dataset& d, CorruptionKind kind, double parameter,
                               std::uint64_t seed) {
    require_image(d, "corrupt");
    Dataset out = d;
    const std::size_t rows = d.image_rows, cols = d.image_cols, n = d.size();
    Matrix& x = out.inputs;
    switch (kind) {
        case CorruptionKind::GaussianNoise: {
            Rng rng(seed);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t p = 0; p < rows * cols; ++p)
                    x(p, s) = clip01(x(p, s) + parameter * rng.normal());
            break;
        }
        case CorruptionKind::Brightness:
            for (double& v : x.data()) v = clip01(v + parameter);
            break;
        case CorruptionKind::Contrast:
            for (double& v : x.data()) v = clip01(0.5 + parameter * (v - 0.5));
            break;
        case CorruptionKind::GaussianBlur:
        case CorruptionKind::Rotation: {
            if (kind == CorruptionKind::GaussianBlur && parameter <= 0.0) break;
            std::vector<double> img(rows * cols);
            for (std::size_t s = 0; s < n; ++s) {
                for (std::size_t p = 0; p < img.size(); ++p) img[p] = d.inputs(p, s);
                const Matrix m = kind == CorruptionKind::GaussianBlur
                                     ? blur_image(img, rows, cols, parameter)
                                     : rotate_image(img, rows, cols, parameter);
                for (std::size_t p = 0; p < img.size(); ++p) x(p, s) = clip01(m.data()[p]);
            }
            break;
        }
    }
    require_finite(x, "corruption");
    return out;
}

TeacherSample synthetic_teacher(std::size_t n, const std::vector<std::size_t>& dims,
                                std::uint64_t seed) {
    if (dims.size() < 2 || n == 0) throw UsageError("synthetic_generative: need L >= 1 and n >= 1");
    Rng rng(seed);
    PCNetwork teacher = PCNetwork::random(dims, Activation::ReLU, rng);
    for (double& w : teacher.weights[0].data()) w = std::abs(w);
    Matrix latents(dims.back(), n);
    for (double& v : latents.data()) v = rng.normal();

    const Matrix raw = forward(teacher, latents);
    double peak = 0.0;
    for (double v : raw.data()) peak = std::max(peak, v);
    if (peak > 0.0)
        for (double& w : teacher.weights[0].data()) w /= peak;

    TeacherSample out;
    Matrix data = forward(teacher, latents);
    for (double& v : data.data()) v = clip01(v);
    out.data.name = "synthetic-teacher";
    out.data.inputs = std::move(data);
    std::uint64_t h = fnv1a({}, seed);
    for (auto d : dims) h = fnv1a({}, h ^ d);
    out.data.checksum = h ^ n;
    out.teacher = std::move(teacher);
    out.latents = std::move(latents);
    return out;
}

Dataset synthetic_generative(std::size_t n, const std::vector<std::size_t>& dims,
                             std::uint64_t seed) {
    return synthetic_teacher(n, dims, seed).data;
}

Dataset synthetic_classification(std::size_t n, const std::vector<std::size_t>& dims,
                                 std::size_t num_classes, std::uint64_t seed) {
    if (num_classes < 2) throw UsageError("synthetic_classification: need >= 2 classes");
    auto t = synthetic_teacher(n, dims, seed);
    Rng rng = Rng(seed).split(1);
    const Matrix readout = init_weights(num_classes, dims.back(), rng);
    const Matrix scores = matmul(readout, t.latents);
    std::vector<std::size_t> classes(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < num_classes; ++c)
            if (scores(c, s) > scores(best, s)) best = c;
        classes[s] = best;
    }
    Dataset d = make_labeled("synthetic-classes", std::move(t.data.inputs), classes, num_classes);
    d.checksum = t.data.checksum ^ num_classes;
    return d;
}

}  // namespace pcn
