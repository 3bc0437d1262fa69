#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcn/activation.hpp"
#include "pcn/executor.hpp"
#include "pcn/matrix.hpp"
#include "pcn/rng.hpp"

namespace pcn {

// Hierarchical Gaussian generative network.
//
// Layer 0 is the generated (output) end and layer L the top. Layer l is
// predicted from the layer above as mu[l] = weights[l] · f(x[l+1]), so
// weights[l] has shape dims[l] × dims[l+1]. The top layer predicts itself
// (mu[L] = x[L]). Covariances are identity.
struct PCNetwork {
    std::vector<std::size_t> dims;
    std::vector<Matrix> weights;
    Activation activation = Activation::Tanh;

    // dims.size() - 1.
    std::size_t depth() const noexcept { return dims.empty() ? 0 : dims.size() - 1; }

    // Throws ShapeError unless L >= 1 and every weight matches dims.
    void validate() const;

    static PCNetwork random(std::vector<std::size_t> dims, Activation activation, Rng& rng,
                            InitScheme scheme = InitScheme::UniformFanIn);
    static PCNetwork zeros(std::vector<std::size_t> dims, Activation activation);

    friend bool operator==(const PCNetwork&, const PCNetwork&) = default;
};

enum class Mode {
    Generative,  // layer 0 clamped to data
    Supervised,  // layer 0 clamped to labels, layer L to inputs
};

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

// Value and error nodes for a batch (one sample per column). errors[L] is
// identically zero because mu[L] = x[L].
struct NetworkState {
    std::vector<Matrix> values;
    std::vector<Matrix> errors;
    std::vector<bool> clamped;

    std::size_t depth() const noexcept { return values.empty() ? 0 : values.size() - 1; }
    std::size_t batch() const noexcept { return values.empty() ? 0 : values.front().cols(); }

    // Throws ShapeError if the state does not fit `net`.
    void validate(const PCNetwork& net) const;

    friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

// mu[l] = weights[l] · f(x[l+1]) for l < L, mu[L] = x[L]. The L products are
// mutually independent and run as one Errors phase on `exec`.
std::vector<Matrix> predictions(const PCNetwork& net, const NetworkState& state);
std::vector<Matrix> predictions(const PCNetwork& net, const NetworkState& state, Executor& exec);

// Successor state with errors[l] = x[l] - mu[l] (l < L) and errors[L] = 0.
NetworkState compute_errors(const PCNetwork& net, const NetworkState& state);
// `phase` selects the ledger bucket; batch preparation charges it to Setup.
NetworkState compute_errors(const PCNetwork& net, const NetworkState& state, Executor& exec,
                            PhaseKind phase = PhaseKind::Errors);

// F = 1/2 · sum over layers and samples of |errors[l]|^2, read from the
// state's error nodes. The 1/2 makes the inference and weight rules exact
// gradient steps on F.
double energy(const NetworkState& state);
// Recomputes errors first.
double energy(const PCNetwork& net, const NetworkState& state);

// Top-down sweep from `top` (dims[L] × B): x[L] = top, x[l] = mu[l] for l < L.
// All errors are zero and nothing is clamped. The sweep is inherently serial
// and is charged to the Setup phase of `exec`.
NetworkState feedforward_init(const PCNetwork& net, const Matrix& top);
NetworkState feedforward_init(const PCNetwork& net, const Matrix& top, Executor& exec);

// Output of the forward pass only (mu[0]); used for test-time readout.
Matrix forward(const PCNetwork& net, const Matrix& top);

// Generative: x[0] = data, clamped {0}. Supervised: x[L] = data, x[0] = labels,
// clamped {0, L}; missing labels is a UsageError. Errors are not refreshed;
// call compute_errors afterwards.
NetworkState clamp(const NetworkState& state, Mode mode, const Matrix& data,
                   const std::optional<Matrix>& labels = std::nullopt);

// clamp + compute_errors for a freshly feedforward-initialized batch.
NetworkState prepare_batch(const PCNetwork& net, Mode mode, const Matrix& data,
                           const std::optional<Matrix>& labels, const Matrix& top,
                           Executor& exec);

// Checkpoint format (little-endian):
//   bytes 0..7   magic "PCNCKPT1"
//   u32          format version (1)
//   u32          activation (0 tanh, 1 relu, 2 identity)
//   u64          L
//   u64 × (L+1)  dims
//   f64 ...      weights[0..L-1], each row-major
void save_network(const PCNetwork& net, std::ostream& out);
PCNetwork load_network(std::istream& in);
void save_network(const PCNetwork& net, const std::string& path);
PCNetwork load_network(const std::string& path);

}  // namespace pcn
