#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "pcn/ledger.hpp"
#include "pcn/matrix.hpp"

namespace pcn {

// What one per-layer task did during a phase.
struct TaskCost {
    std::size_t mm = 0;
    std::size_t grad = 0;
};

using LayerTask = std::function<TaskCost(std::size_t layer)>;

enum class EngineKind { Serial, LayerParallel };

// Runs barrier-delimited phases of independent per-layer tasks and keeps the
// StepLedger. Every phase reads only the snapshot published before it and each
// task writes only its own layer's successor slot, so the order tasks run in
// cannot change results.
//
// Task failures are rethrown after the phase completes, lowest layer first.
// pcn::Error subclasses pass through unchanged; anything else becomes an
// EngineError carrying the layer id.
class Executor {
public:
    virtual ~Executor() = default;

    void run_phase(PhaseKind kind, std::size_t tasks, const LayerTask& task);

    // Resets `slots` before a phase. With poisoning enabled every slot is filled
    // with NaN so a task that reads another layer's successor (instead of the
    // snapshot) produces a non-finite result and trips divergence checks.
    void prepare_slots(std::vector<Matrix>& slots, const std::vector<Matrix>& shapes) const;

    void set_poisoning(bool on) noexcept { poison_ = on; }
    bool poisoning() const noexcept { return poison_; }

    void note_weight_update() noexcept { ++ledger_.weight_updates; }
    StepLedger& ledger() noexcept { return ledger_; }
    const StepLedger& ledger() const noexcept { return ledger_; }

    virtual EngineKind kind() const noexcept = 0;
    virtual std::size_t workers() const noexcept = 0;

protected:
    // Runs task(i) for all i < tasks; stores per-task cost and failure.
    virtual void dispatch(std::size_t tasks, const LayerTask& task, std::vector<TaskCost>& costs,
                          std::vector<std::exception_ptr>& failures) = 0;

private:
    StepLedger ledger_;
    bool poison_ = false;
    std::vector<TaskCost> costs_;
    std::vector<std::exception_ptr> failures_;
};

class SerialExecutor final : public Executor {
public:
    EngineKind kind() const noexcept override { return EngineKind::Serial; }
    std::size_t workers() const noexcept override { return 1; }

protected:
    void dispatch(std::size_t tasks, const LayerTask& task, std::vector<TaskCost>& costs,
                  std::vector<std::exception_ptr>& failures) override;
};

// Persistent pool of worker threads. Task i runs on worker i % workers; the
// coordinator publishes a phase, wakes the pool, and waits for every worker
// to report back before returning (a full barrier per phase).
class LayerParallelExecutor final : public Executor {
public:
    explicit LayerParallelExecutor(std::size_t workers);
    ~LayerParallelExecutor() override;

    LayerParallelExecutor(const LayerParallelExecutor&) = delete;
    LayerParallelExecutor& operator=(const LayerParallelExecutor&) = delete;

    EngineKind kind() const noexcept override { return EngineKind::LayerParallel; }
    std::size_t workers() const noexcept override { return worker_count_; }

protected:
    void dispatch(std::size_t tasks, const LayerTask& task, std::vector<TaskCost>& costs,
                  std::vector<std::exception_ptr>& failures) override;

private:
    void worker_loop(std::size_t id);

    std::size_t worker_count_;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    std::size_t generation_ = 0;
    std::size_t pending_ = 0;
    bool stopping_ = false;

    // Current phase, valid while pending_ > 0.
    std::size_t tasks_ = 0;
    const LayerTask* task_ = nullptr;
    std::vector<TaskCost>* costs_ = nullptr;
    std::vector<std::exception_ptr>* failures_ = nullptr;
};

std::unique_ptr<Executor> make_executor(EngineKind kind, std::size_t workers = 1);

}  // namespace pcn
