#include "pcn/executor.hpp"

#include <chrono>
#include <limits>

#include "pcn/errors.hpp"

namespace pcn {

std::string to_string(PhaseKind kind) {
    switch (kind) {
        case PhaseKind::Errors: return "errors";
        case PhaseKind::Values: return "values";
        case PhaseKind::Weights: return "weights";
        case PhaseKind::Forward: return "forward";
        case PhaseKind::Backward: return "backward";
        case PhaseKind::Setup: return "setup";
        case PhaseKind::Count: break;
    }
    return "unknown";
}

std::int64_t StepLedger::total_wall_ns() const noexcept {
    std::int64_t t = 0;
    for (auto v : wall_ns) t += v;
    return t;
}

StepLedger& StepLedger::operator+=(const StepLedger& o) noexcept {
    mm_count += o.mm_count;
    smm_count += o.smm_count;
    weight_updates += o.weight_updates;
    grad_products += o.grad_products;
    setup_mm += o.setup_mm;
    setup_smm += o.setup_smm;
    for (std::size_t i = 0; i < wall_ns.size(); ++i) wall_ns[i] += o.wall_ns[i];
    return *this;
}

StepLedger operator-(StepLedger a, const StepLedger& b) noexcept {
    a.mm_count -= b.mm_count;
    a.smm_count -= b.smm_count;
    a.weight_updates -= b.weight_updates;
    a.grad_products -= b.grad_products;
    a.setup_mm -= b.setup_mm;
    a.setup_smm -= b.setup_smm;
    for (std::size_t i = 0; i < a.wall_ns.size(); ++i) a.wall_ns[i] -= b.wall_ns[i];
    return a;
}

bool StepLedger::same_counts(const StepLedger& o) const noexcept {
    return mm_count == o.mm_count && smm_count == o.smm_count &&
           weight_updates == o.weight_updates && grad_products == o.grad_products &&
           setup_mm == o.setup_mm && setup_smm == o.setup_smm;
}

void Executor::run_phase(PhaseKind kind, std::size_t tasks, const LayerTask& task) {
    costs_.assign(tasks, TaskCost{});
    failures_.assign(tasks, nullptr);
    const auto start = std::chrono::steady_clock::now();
    dispatch(tasks, task, costs_, failures_);
    const auto stop = std::chrono::steady_clock::now();
    ledger_.wall_ns[static_cast<std::size_t>(kind)] +=
        std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();

    for (std::size_t i = 0; i < tasks; ++i) {
        if (!failures_[i]) continue;
        try {
            std::rethrow_exception(failures_[i]);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw EngineError(e.what(), i);
        } catch (...) {
            throw EngineError("unknown failure", i);
        }
    }

    std::size_t mm = 0, grad = 0;
    for (const auto& c : costs_) {
        mm += c.mm;
        grad += c.grad;
    }
    if (kind == PhaseKind::Setup) {
        ledger_.setup_mm += mm;
        if (mm > 0) ++ledger_.setup_smm;
    } else {
        ledger_.mm_count += mm;
        if (mm > 0) ++ledger_.smm_count;
    }
    ledger_.grad_products += grad;
}

void Executor::prepare_slots(std::vector<Matrix>& slots, const std::vector<Matrix>& shapes) const {
    const double fill = poison_ ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    slots.resize(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i)
        slots[i] = Matrix(shapes[i].rows(), shapes[i].cols(), fill);
}

void SerialExecutor::dispatch(std::size_t tasks, const LayerTask& task,
                              std::vector<TaskCost>& costs,
                              std::vector<std::exception_ptr>& failures) {
    for (std::size_t i = 0; i < tasks; ++i) {
        try {
            costs[i] = task(i);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    }
}

LayerParallelExecutor::LayerParallelExecutor(std::size_t workers) : worker_count_(workers) {
    if (workers == 0) throw UsageError("LayerParallelExecutor: workers must be >= 1");
    threads_.reserve(workers);
    for (std::size_t id = 0; id < workers; ++id)
        threads_.emplace_back([this, id] { worker_loop(id); });
}

LayerParallelExecutor::~LayerParallelExecutor() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
}

void LayerParallelExecutor::dispatch(std::size_t tasks, const LayerTask& task,
                                     std::vector<TaskCost>& costs,
                                     std::vector<std::exception_ptr>& failures) {
    {
        std::lock_guard lock(mutex_);
        tasks_ = tasks;
        task_ = &task;
        costs_ = &costs;
        failures_ = &failures;
        pending_ = worker_count_;
        ++generation_;
    }
    wake_.notify_all();
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
}

void LayerParallelExecutor::worker_loop(std::size_t id) {
    std::size_t seen = 0;
    const std::size_t stride = worker_count_;
    for (;;) {
        std::size_t tasks;
        const LayerTask* task;
        std::vector<TaskCost>* costs;
        std::vector<std::exception_ptr>* failures;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
            if (stopping_) return;
            seen = generation_;
            tasks = tasks_;
            task = task_;
            costs = costs_;
            failures = failures_;
        }
        for (std::size_t i = id; i < tasks; i += stride) {
            try {
                (*costs)[i] = (*task)(i);
            } catch (...) {
                (*failures)[i] = std::current_exception();
            }
        }
        {
            std::lock_guard lock(mutex_);
            if (--pending_ == 0) done_.notify_one();
        }
    }
}

std::unique_ptr<Executor> make_executor(EngineKind kind, std::size_t workers) {
    if (kind == EngineKind::Serial) return std::make_unique<SerialExecutor>();
    return std::make_unique<LayerParallelExecutor>(workers);
}

}  // namespace pcn
