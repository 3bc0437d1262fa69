#include "pcn/network.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "pcn/errors.hpp"
#include "pcn/kernels.hpp"

namespace pcn {

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'C', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw ParseError(std::string("checkpoint truncated while reading ") + what,
                         static_cast<std::size_t>(in.gcount()));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

std::uint32_t activation_code(Activation a) {
    switch (a) {
        case Activation::Tanh: return 0;
        case Activation::ReLU: return 1;
        case Activation::Identity: return 2;
    }
    return 2;
}

}  // namespace

void PCNetwork::validate() const {
    if (dims.size() < 2) throw ShapeError("PCNetwork: need at least two layers (L >= 1)");
    if (weights.size() != dims.size() - 1)
        throw ShapeError("PCNetwork: expected " + std::to_string(dims.size() - 1) +
                         " weight matrices, got " + std::to_string(weights.size()));
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (dims[l] == 0) throw ShapeError("PCNetwork: zero-width layer");
        if (weights[l].rows() != dims[l] || weights[l].cols() != dims[l + 1])
            throw ShapeError("PCNetwork: weights[" + std::to_string(l) + "] is " +
                             weights[l].shape_string() + ", expected " +
                             std::to_string(dims[l]) + "x" + std::to_string(dims[l + 1]));
    }
}

PCNetwork PCNetwork::random(std::vector<std::size_t> dims, Activation activation, Rng& rng,
                            InitScheme scheme) {
    PCNetwork net;
    net.dims = std::move(dims);
    net.activation = activation;
    if (net.dims.size() < 2) throw ShapeError("PCNetwork: need at least two layers (L >= 1)");
    for (std::size_t l = 0; l + 1 < net.dims.size(); ++l)
        net.weights.push_back(init_weights(net.dims[l], net.dims[l + 1], rng, scheme));
    return net;
}

PCNetwork PCNetwork::zeros(std::vector<std::size_t> dims, Activation activation) {
    PCNetwork net;
    net.dims = std::move(dims);
    net.activation = activation;
    for (std::size_t l = 0; l + 1 < net.dims.size(); ++l)
        net.weights.emplace_back(net.dims[l], net.dims[l + 1]);
    net.validate();
    return net;
}

std::string to_string(Mode mode) {
    return mode == Mode::Generative ? "generative" : "supervised";
}

Mode parse_mode(const std::string& name) {
    if (name == "generative") return Mode::Generative;
    if (name == "supervised") return Mode::Supervised;
    throw ConfigError("unknown mode '" + name + "'");
}

void NetworkState::validate(const PCNetwork& net) const {
    const std::size_t n = net.dims.size();
    if (values.size() != n || errors.size() != n || clamped.size() != n)
        throw ShapeError("NetworkState: layer count does not match network");
    const std::size_t b = batch();
    for (std::size_t l = 0; l < n; ++l) {
        if (values[l].rows() != net.dims[l] || values[l].cols() != b)
            throw ShapeError("NetworkState: values[" + std::to_string(l) + "] is " +
                             values[l].shape_string());
        if (!errors[l].same_shape(values[l]))
            throw ShapeError("NetworkState: errors[" + std::to_string(l) + "] is " +
                             errors[l].shape_string());
    }
}

std::vector<Matrix> predictions(const PCNetwork& net, const NetworkState& state) {
    SerialExecutor exec;
    return predictions(net, state, exec);
}

std::vector<Matrix> predictions(const PCNetwork& net, const NetworkState& state, Executor& exec) {
    net.validate();
    state.validate(net);
    const std::size_t L = net.depth();
    std::vector<Matrix> mu(L + 1);
    exec.run_phase(PhaseKind::Errors, L + 1, [&](std::size_t l) {
        if (l == L) {
            mu[l] = state.values[L];
            return TaskCost{};
        }
        mu[l] = kernels::prediction(net, state.values, l);
        return TaskCost{1, 0};
    });
    return mu;
}

NetworkState compute_errors(const PCNetwork& net, const NetworkState& state) {
    SerialExecutor exec;
    return compute_errors(net, state, exec);
}

NetworkState compute_errors(const PCNetwork& net, const NetworkState& state, Executor& exec,
                            PhaseKind phase) {
    net.validate();
    state.validate(net);
    const std::size_t L = net.depth();
    NetworkState next;
    next.values = state.values;
    next.clamped = state.clamped;
    exec.prepare_slots(next.errors, kernels::shape_like(state.errors));
    exec.run_phase(phase, L + 1, [&](std::size_t l) {
        next.errors[l] = kernels::error(net, state.values, l);
        return TaskCost{l < L ? std::size_t{1} : std::size_t{0}, 0};
    });
    return next;
}

double energy(const NetworkState& state) {
    double total = 0.0;
    for (const auto& e : state.errors) total += sum_squares(e);
    return 0.5 * total;
}

double energy(const PCNetwork& net, const NetworkState& state) {
    return energy(compute_errors(net, state));
}

NetworkState feedforward_init(const PCNetwork& net, const Matrix& top) {
    SerialExecutor exec;
    return feedforward_init(net, top, exec);
}

NetworkState feedforward_init(const PCNetwork& net, const Matrix& top, Executor& exec) {
    net.validate();
    const std::size_t L = net.depth();
    if (top.rows() != net.dims[L])
        throw ShapeError("feedforward_init: input has " + std::to_string(top.rows()) +
                         " rows, top layer width is " + std::to_string(net.dims[L]));
    require_finite(top, "feedforward input", static_cast<long>(L));
    NetworkState s;
    s.values.resize(L + 1);
    s.errors.resize(L + 1);
    s.clamped.assign(L + 1, false);
    s.values[L] = top;
    for (std::size_t l = L; l-- > 0;) {
        exec.run_phase(PhaseKind::Setup, 1, [&](std::size_t) {
            s.values[l] = kernels::prediction(net, s.values, l);
            return TaskCost{1, 0};
        });
    }
    for (std::size_t l = 0; l <= L; ++l) s.errors[l] = Matrix(net.dims[l], top.cols());
    return s;
}

Matrix forward(const PCNetwork& net, const Matrix& top) {
    net.validate();
    if (top.rows() != net.dims[net.depth()]) throw ShapeError("forward: input width mismatch");
    Matrix x = top;
    for (std::size_t l = net.depth(); l-- > 0;) x = matmul(net.weights[l], apply(net.activation, x));
    return x;
}

NetworkState clamp(const NetworkState& state, Mode mode, const Matrix& data,
                   const std::optional<Matrix>& labels) {
    NetworkState next = state;
    const std::size_t L = state.depth();
    if (state.values.empty()) throw ShapeError("clamp: empty state");
    auto overwrite = [&](std::size_t l, const Matrix& m, const char* what) {
        if (!m.same_shape(next.values[l]))
            throw ShapeError(std::string("clamp: ") + what + " is " + m.shape_string() +
                             ", layer " + std::to_string(l) + " is " +
                             next.values[l].shape_string());
        next.values[l] = m;
        next.clamped[l] = true;
    };
    std::fill(next.clamped.begin(), next.clamped.end(), false);
    if (mode == Mode::Generative) {
        overwrite(0, data, "data");
    } else {
        if (!labels) throw UsageError("clamp: supervised mode requires labels");
        overwrite(L, data, "input");
        overwrite(0, *labels, "labels");
    }
    return next;
}

NetworkState prepare_batch(const PCNetwork& net, Mode mode, const Matrix& data,
                           const std::optional<Matrix>& labels, const Matrix& top,
                           Executor& exec) {
    NetworkState s = feedforward_init(net, top, exec);
    s = clamp(s, mode, data, labels);
    return compute_errors(net, s, exec, PhaseKind::Setup);
}

void save_network(const PCNetwork& net, std::ostream& out) {
    net.validate();
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, kFormatVersion);
    write_le<std::uint32_t>(out, activation_code(net.activation));
    write_le<std::uint64_t>(out, net.depth());
    for (auto d : net.dims) write_le<std::uint64_t>(out, d);
    for (const auto& w : net.weights)
        for (double v : w.data()) write_le<double>(out, v);
    if (!out) throw Error("save_network: write failed");
}

PCNetwork load_network(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw ParseError("checkpoint: bad magic", 0);
    const auto version = read_le<std::uint32_t>(in, "version");
    if (version != kFormatVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), 8);
    const auto act = read_le<std::uint32_t>(in, "activation");
    if (act > 2) throw ParseError("checkpoint: unknown activation code", 12);
    const auto L = read_le<std::uint64_t>(in, "depth");
    if (L == 0 || L > 4096) throw ParseError("checkpoint: implausible depth", 16);
    PCNetwork net;
    net.activation = act == 0 ? Activation::Tanh : act == 1 ? Activation::ReLU : Activation::Identity;
    for (std::uint64_t i = 0; i <= L; ++i) net.dims.push_back(read_le<std::uint64_t>(in, "dims"));
    for (std::size_t l = 0; l < L; ++l) {
        Matrix w(net.dims[l], net.dims[l + 1]);
        for (double& v : w.data()) v = read_le<double>(in, "weights");
        net.weights.push_back(std::move(w));
    }
    net.validate();
    return net;
}

void save_network(const PCNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open '" + path + "' for writing");
    save_network(net, out);
}

PCNetwork load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open checkpoint '" + path + "'");
    return load_network(in);
}

}  // namespace pcn
