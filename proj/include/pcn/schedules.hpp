#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pcn/data.hpp"
#include "pcn/executor.hpp"
#include "pcn/network.hpp"

namespace pcn {

enum class Algorithm { PC, ZIL, IPC, BP };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

// Order of the value and weight updates inside one incremental step.
enum class IpcOrder {
    // Values and weights both read the pre-step snapshot (one barrier phase).
    Snapshot,
    // Values first, errors refreshed, then weights from the fresh values and
    // errors, then errors refreshed again. Costs 3 SMMs per update.
    Sequential,
};

struct ScheduleConfig {
    Algorithm algorithm = Algorithm::IPC;
    double gamma = 0.5;          // inference step size, (0, 1]; Z-IL needs exactly 1
    double alpha = 1e-3;         // weight learning rate, > 0
    std::size_t T = 8;           // PC: inference steps per weight update; iPC: steps per batch
    std::size_t batch_size = 0;  // 0 selects the full-batch regime
    std::size_t epochs = 1;      // mini-batch regime
    std::size_t total_steps = 0; // full-batch regime: weight-update budget
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    IpcOrder ipc_order = IpcOrder::Snapshot;
    bool warm_start = false;     // mini-batch iPC: keep each sample's latent values across epochs
    std::size_t patience = 0;    // early stopping on validation accuracy; 0 disables
    double plateau_tolerance = 1e-6;
    std::size_t plateau_window = 10;

    // Throws ConfigError if a field is out of range for a depth-L network.
    void validate(std::size_t L) const;
};

// One Jacobi inference sweep: every unclamped layer l >= 1 moves by
// gamma · (-e[l] + f'(x[l]) * weights[l-1]ᵀ · e[l-1]) computed from the input
// state, then errors are recomputed. Clamped layers are copied through.
// Costs 2 SMMs (values, then errors).
NetworkState inference_step(const PCNetwork& net, const NetworkState& state, double gamma);
NetworkState inference_step(const PCNetwork& net, const NetworkState& state, double gamma,
                            Executor& exec);

// weights[l] · (1 - alpha·decay) + (alpha / B) · e[l] · f(x[l+1])ᵀ for every l,
// i.e. a gradient step on F / B. Errors in `state` must be current. The
// returned network makes those errors stale.
PCNetwork weight_step(const PCNetwork& net, const NetworkState& state, double alpha,
                      double weight_decay = 0.0);
PCNetwork weight_step(const PCNetwork& net, const NetworkState& state, double alpha,
                      double weight_decay, Executor& exec);

struct Update {
    PCNetwork net;
    NetworkState state;
};

// Called after every inference iteration with the successor state.
using StepObserver = std::function<void(const PCNetwork&, const NetworkState&)>;

// Incremental step: values and weights updated together from one snapshot,
// then errors refreshed with the new weights (2 SMMs).
Update ipc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg,
                  Executor& exec);
Update ipc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg);

// T inference iterations; the weights move once, during the last iteration,
// from the same snapshot as that iteration's values. 2T SMMs per update.
// With T = 1 this is exactly ipc_update.
Update pc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg,
                 Executor& exec, const StepObserver& observe = {});
Update pc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg);

// Requires gamma == 1 and a state built by feedforward_init + clamp (all hidden
// errors exactly zero). At iteration t = 0..L-2 an inference sweep runs and
// only weights[t] is updated from its snapshot; weights[L-1] is updated from
// the errors current after L-1 sweeps. Reproduces the BP update.
// 2(L-1) SMMs.
PCNetwork zil_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg,
                     Executor& exec);
PCNetwork zil_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg);

// Backpropagation with loss 1/2 |target - mu[0]|^2 averaged over the batch:
// forward recursion from `input` (L SMMs), delta[0] = target - mu[0],
// delta[l] = f'(a[l]) * weights[l-1]ᵀ · delta[l-1] (L-1 SMMs), then
// weights[l] · (1 - alpha·decay) + (alpha / B) · delta[l] · f(a[l+1])ᵀ.
PCNetwork bp_update(const PCNetwork& net, const Matrix& input, const Matrix& target, double alpha,
                    double weight_decay, Executor& exec);
PCNetwork bp_update(const PCNetwork& net, const Matrix& input, const Matrix& target, double alpha,
                    double weight_decay = 0.0);

// ---- training driver ------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean 1/2 |y - forward(x)|^2 (supervised) or mean energy
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    double test_accuracy = 0.0;
};

// One weight update as seen on the SMM axis.
struct UpdateRecord {
    std::uint64_t smm = 0;  // cumulative update SMMs after this update
    double loss = 0.0;      // training loss after this update
};

struct TrainReport {
    Algorithm algorithm = Algorithm::IPC;
    Mode mode = Mode::Supervised;
    std::size_t L = 0;
    std::size_t T = 0;
    IpcOrder ipc_order = IpcOrder::Snapshot;

    // Energy after each inference iteration (full batch) or after each batch
    // (mini-batch), with the cumulative iteration count and update SMMs at
    // that point. Full-batch iPC and PC runs start with an iteration-0 entry
    // for the prepared state. BP has no inference; its trace holds the loss energy.
    std::vector<double> energy_trace;
    std::vector<std::uint64_t> trace_iterations;
    std::vector<std::uint64_t> trace_smm;

    std::vector<EpochRecord> epochs;
    std::vector<UpdateRecord> updates;  // filled when TrainOptions::record_loss_per_update

    StepLedger ledger;
    PCNetwork network;                 // best by validation accuracy when early stopping
    std::size_t best_epoch = 0;
    double test_accuracy = 0.0;        // of `network`
    bool diverged = false;
    std::string divergence;
};

struct TrainOptions {
    EngineKind engine = EngineKind::Serial;
    std::size_t workers = 1;
    const Dataset* validation = nullptr;
    const Dataset* test = nullptr;
    bool record_loss_per_update = false;
    // Generative full batch: std of the random top-layer latents used for the
    // initial top-down sweep.
    double latent_scale = 1.0;
    // Stop a full-batch run when the energy's relative change over
    // plateau_window updates falls below plateau_tolerance.
    bool stop_on_plateau = true;
};

// Mean over samples of 1/2 |labels - forward(inputs)|^2.
double supervised_loss(const PCNetwork& net, const Dataset& data);

TrainReport train(const PCNetwork& net, const Dataset& data, const ScheduleConfig& cfg, Mode mode,
                  const TrainOptions& options = {});

}  // namespace pcn
