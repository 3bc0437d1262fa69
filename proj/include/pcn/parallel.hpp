#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcn/executor.hpp"
#include "pcn/schedules.hpp"

namespace pcn {

struct UpdateCost {
    std::uint64_t mm = 0;
    std::uint64_t smm = 0;

    bool operator==(const UpdateCost&) const = default;
};

// Closed-form propagation cost of one full weight update.
//   PC   (2L-1)·T MMs, 2T SMMs
//   iPC  (2L-1) MMs, 2 SMMs (3 SMMs with IpcOrder::Sequential)
//   Z-IL (2L-1)·(L-1) MMs, 2(L-1) SMMs
//   BP   (2L-1) MMs, 2L-1 SMMs
// Generative mode leaves the top layer free, which adds one MM per inference
// sweep (PC, iPC); SMMs are unchanged. Throws UsageError for L < 1 or T < 1,
// ConfigError for Z-IL/BP in generative mode.
UpdateCost predicted_smm(Algorithm algorithm, std::size_t L, std::size_t T,
                         Mode mode = Mode::Supervised, IpcOrder order = IpcOrder::Snapshot);

struct ParallelStep {
    PCNetwork net;
    NetworkState state;  // successor state; unchanged input for Z-IL and BP
    StepLedger delta;
};

// One full weight update of cfg.algorithm through `exec`. For BP the input is
// the state's top layer and the target its bottom layer.
ParallelStep run_parallel_step(const PCNetwork& net, const NetworkState& state,
                               const ScheduleConfig& cfg, Executor& exec);
// Same through a LayerParallel pool of `workers` threads.
ParallelStep run_parallel_step(const PCNetwork& net, const NetworkState& state,
                               const ScheduleConfig& cfg, std::size_t workers);

struct BenchRow {
    std::string algorithm;
    std::size_t L = 0;
    std::size_t width = 0;
    std::size_t workers = 0;
    double median_ns_per_update = 0.0;
    std::uint64_t smm_per_update = 0;
    double ratio_vs_bp = 1.0;
};

struct BenchSpec {
    std::size_t L = 3;
    std::size_t width = 16;
    std::size_t input = 0;   // 0: same as width
    std::size_t output = 0;  // 0: same as width
    std::size_t batch = 1;
    std::size_t repeats = 10;
    std::size_t workers = 0;  // 0: one per layer (L + 1)
    std::uint64_t seed = 0;
};

// Median wall-clock per weight update: iPC on the layer-parallel engine and
// BP on the serial engine, same synthetic network and batch. Returns
// {iPC row, BP row}; ratio_vs_bp is ms_iPC / ms_BP. repeats < 10 is a
// UsageError.
std::vector<BenchRow> bench_update_ratio(const BenchSpec& spec);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

struct AuditResult {
    bool pass = false;
    UpdateCost expected;  // per update
    UpdateCost observed;  // per update (totals divided by weight_updates)
    std::uint64_t updates = 0;
    std::string message;
};

// Compares a run's ledger with predicted_smm. Fails when no update ran or the
// totals are not exactly updates × expected.
AuditResult count_audit(const TrainReport& report);

}  // namespace pcn
