#include "pcn/schedules.hpp"

#include <algorithm>
#include <cmath>

#include "pcn/errors.hpp"
#include "pcn/kernels.hpp"
#include "pcn/metrics.hpp"

namespace pcn {

namespace {

// Which weight matrices move during a joint step.
struct WeightPlan {
    enum class Which { None, All, One } which = Which::None;
    std::size_t layer = 0;
    double alpha = 0.0;
    double decay = 0.0;

    bool updates(std::size_t l) const noexcept {
        return which == Which::All || (which == Which::One && layer == l);
    }
};

// One Values phase (values and planned weights from the same snapshot)
// followed by one Errors phase under the new weights.
Update joint_step(const PCNetwork& net, const NetworkState& state, double gamma,
                  const WeightPlan& plan, Executor& exec) {
    net.validate();
    state.validate(net);
    const std::size_t L = net.depth();
    std::vector<Matrix> next_values, next_weights;
    exec.prepare_slots(next_values, kernels::shape_like(state.values));
    if (plan.which != WeightPlan::Which::None) exec.prepare_slots(next_weights, net.weights);

    exec.run_phase(PhaseKind::Values, L + 1, [&](std::size_t l) {
        TaskCost cost;
        if (l == 0 || state.clamped[l]) {
            next_values[l] = state.values[l];
        } else {
            next_values[l] = kernels::value_update(net, state.values, state.errors, l, gamma);
            cost.mm = 1;
        }
        if (l < L && plan.updates(l)) {
            next_weights[l] =
                kernels::weight_update(net, state.values, state.errors, l, plan.alpha, plan.decay);
            cost.grad = 1;
        }
        return cost;
    });

    Update out{net, {}};
    for (std::size_t l = 0; l < L; ++l)
        if (plan.updates(l)) out.net.weights[l] = std::move(next_weights[l]);
    NetworkState moved;
    moved.values = std::move(next_values);
    moved.errors = state.errors;
    moved.clamped = state.clamped;
    out.state = compute_errors(out.net, moved, exec);
    return out;
}

WeightPlan all_weights(const ScheduleConfig& cfg) {
    return {WeightPlan::Which::All, 0, cfg.alpha, cfg.weight_decay};
}

std::uint64_t relative_plateau(const std::vector<double>& energy, std::size_t window, double tol) {
    if (energy.size() <= window) return 0;
    const double now = energy.back();
    const double then = energy[energy.size() - 1 - window];
    const double scale = std::max(std::abs(then), 1e-300);
    return std::abs(then - now) / scale < tol ? 1 : 0;
}

Matrix random_latents(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

// Loss energy of a BP-style readout: 1/2 sum |target - forward(input)|^2.
double readout_energy(const PCNetwork& net, const Matrix& input, const Matrix& target) {
    return 0.5 * sum_squares(subtract(target, forward(net, input)));
}

}  // namespace

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::PC: return "pc";
        case Algorithm::ZIL: return "zil";
        case Algorithm::IPC: return "ipc";
        case Algorithm::BP: return "bp";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "pc") return Algorithm::PC;
    if (name == "zil") return Algorithm::ZIL;
    if (name == "ipc") return Algorithm::IPC;
    if (name == "bp") return Algorithm::BP;
    throw ConfigError("unknown algorithm '" + name + "' (expected pc, zil, ipc or bp)");
}

void ScheduleConfig::validate(std::size_t L) const {
    if (L < 1) throw ConfigError("network depth must be >= 1");
    if (algorithm != Algorithm::BP && !(gamma > 0.0 && gamma <= 1.0))
        throw ConfigError("gamma must lie in (0, 1]");
    if (algorithm == Algorithm::ZIL && gamma != 1.0) throw ConfigError("Z-IL requires gamma = 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
    if (T < 1) throw ConfigError("T must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (plateau_window < 1) throw ConfigError("plateau_window must be >= 1");
}

NetworkState inference_step(const PCNetwork& net, const NetworkState& state, double gamma) {
    SerialExecutor exec;
    return inference_step(net, state, gamma, exec);
}

NetworkState inference_step(const PCNetwork& net, const NetworkState& state, double gamma,
                            Executor& exec) {
    return joint_step(net, state, gamma, WeightPlan{}, exec).state;
}

PCNetwork weight_step(const PCNetwork& net, const NetworkState& state, double alpha,
                      double weight_decay) {
    SerialExecutor exec;
    return weight_step(net, state, alpha, weight_decay, exec);
}

PCNetwork weight_step(const PCNetwork& net, const NetworkState& state, double alpha,
                      double weight_decay, Executor& exec) {
    net.validate();
    state.validate(net);
    const std::size_t L = net.depth();
    std::vector<Matrix> next;
    exec.prepare_slots(next, net.weights);
    exec.run_phase(PhaseKind::Weights, L, [&](std::size_t l) {
        next[l] = kernels::weight_update(net, state.values, state.errors, l, alpha, weight_decay);
        return TaskCost{0, 1};
    });
    PCNetwork out = net;
    out.weights = std::move(next);
    return out;
}

Update ipc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg) {
    SerialExecutor exec;
    return ipc_update(net, state, cfg, exec);
}

Update ipc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg,
                  Executor& exec) {
    Update out;
    if (cfg.ipc_order == IpcOrder::Snapshot) {
        out = joint_step(net, state, cfg.gamma, all_weights(cfg), exec);
    } else {
        NetworkState moved = joint_step(net, state, cfg.gamma, WeightPlan{}, exec).state;
        out.net = weight_step(net, moved, cfg.alpha, cfg.weight_decay, exec);
        out.state = compute_errors(out.net, moved, exec);
    }
    exec.note_weight_update();
    return out;
}

Update pc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg) {
    SerialExecutor exec;
    return pc_update(net, state, cfg, exec);
}

Update pc_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg,
                 Executor& exec, const StepObserver& observe) {
    if (cfg.T < 1) throw ConfigError("T must be >= 1");
    NetworkState s = state;
    for (std::size_t t = 0; t + 1 < cfg.T; ++t) {
        s = joint_step(net, s, cfg.gamma, WeightPlan{}, exec).state;
        if (observe) observe(net, s);
    }
    Update out = joint_step(net, s, cfg.gamma, all_weights(cfg), exec);
    if (observe) observe(out.net, out.state);
    exec.note_weight_update();
    return out;
}

PCNetwork zil_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg) {
    SerialExecutor exec;
    return zil_update(net, state, cfg, exec);
}

PCNetwork zil_update(const PCNetwork& net, const NetworkState& state, const ScheduleConfig& cfg,
                     Executor& exec) {
    if (cfg.gamma != 1.0) throw ConfigError("Z-IL requires gamma = 1");
    net.validate();
    state.validate(net);
    const std::size_t L = net.depth();
    for (std::size_t l = 1; l < L; ++l)
        for (double e : state.errors[l].data())
            if (e != 0.0)
                throw ConfigError("Z-IL requires a feedforward-initialized state (hidden errors must be zero)");

    Update cur{net, state};
    for (std::size_t t = 0; t + 1 < L; ++t) {
        const WeightPlan plan{WeightPlan::Which::One, t, cfg.alpha, cfg.weight_decay};
        cur = joint_step(cur.net, cur.state, 1.0, plan, exec);
    }
    const std::size_t last = L - 1;
    Matrix top_weights;
    exec.run_phase(PhaseKind::Weights, 1, [&](std::size_t) {
        top_weights = kernels::weight_update(cur.net, cur.state.values, cur.state.errors, last,
                                             cfg.alpha, cfg.weight_decay);
        return TaskCost{0, 1};
    });
    cur.net.weights[last] = std::move(top_weights);
    exec.note_weight_update();
    return cur.net;
}

PCNetwork bp_update(const PCNetwork& net, const Matrix& input, const Matrix& target, double alpha,
                    double weight_decay) {
    SerialExecutor exec;
    return bp_update(net, input, target, alpha, weight_decay, exec);
}

PCNetwork bp_update(const PCNetwork& net, const Matrix& input, const Matrix& target, double alpha,
                    double weight_decay, Executor& exec) {
    net.validate();
    const std::size_t L = net.depth();
    if (input.rows() != net.dims[L]) throw ShapeError("bp_update: input width mismatch");
    if (target.rows() != net.dims[0] || target.cols() != input.cols())
        throw ShapeError("bp_update: target shape mismatch");

    std::vector<Matrix> act(L + 1);
    act[L] = input;
    for (std::size_t l = L; l-- > 0;) {
        exec.run_phase(PhaseKind::Forward, 1, [&](std::size_t) {
            act[l] = kernels::prediction(net, act, l);
            return TaskCost{1, 0};
        });
    }
    std::vector<Matrix> delta(L + 1);
    delta[0] = subtract(target, act[0]);
    for (std::size_t l = 1; l < L; ++l) {
        exec.run_phase(PhaseKind::Backward, 1, [&](std::size_t) {
            delta[l] = hadamard(derivative(net.activation, act[l]),
                                matmul_tn(net.weights[l - 1], delta[l - 1]));
            return TaskCost{1, 0};
        });
    }
    delta[L] = Matrix(net.dims[L], input.cols());

    std::vector<Matrix> next;
    exec.prepare_slots(next, net.weights);
    exec.run_phase(PhaseKind::Weights, L, [&](std::size_t l) {
        next[l] = kernels::weight_update(net, act, delta, l, alpha, weight_decay);
        return TaskCost{0, 1};
    });
    exec.note_weight_update();
    PCNetwork out = net;
    out.weights = std::move(next);
    return out;
}

double supervised_loss(const PCNetwork& net, const Dataset& data) {
    if (!data.labels) throw UsageError("supervised_loss: dataset has no labels");
    return readout_energy(net, data.inputs, *data.labels) / static_cast<double>(data.size());
}

namespace {

class Trainer {
public:
    Trainer(const PCNetwork& net, const Dataset& data, const ScheduleConfig& cfg, Mode mode,
            const TrainOptions& opt)
        : net_(net), data_(data), cfg_(cfg), mode_(mode), opt_(opt),
          exec_(make_executor(opt.engine, opt.workers)), rng_(cfg.seed) {
        report_.algorithm = cfg.algorithm;
        report_.mode = mode;
        report_.L = net.depth();
        report_.T = cfg.T;
        report_.ipc_order = cfg.ipc_order;
        report_.network = net;
    }

    TrainReport run() {
        net_.validate();
        cfg_.validate(net_.depth());
        if (mode_ == Mode::Supervised && !data_.labels)
            throw UsageError("train: supervised mode needs a labeled dataset");
        if (mode_ == Mode::Generative &&
            (cfg_.algorithm == Algorithm::BP || cfg_.algorithm == Algorithm::ZIL))
            throw ConfigError("train: " + to_string(cfg_.algorithm) +
                              " needs supervised mode (clamped input and output)");
        if (data_.features() != net_.dims[mode_ == Mode::Supervised ? net_.depth() : 0])
            throw ShapeError("train: dataset width does not match the clamped layer");
        try {
            if (cfg_.batch_size == 0)
                full_batch();
            else
                mini_batch();
        } catch (const DivergenceError& e) {
            report_.diverged = true;
            report_.divergence = e.what();
        }
        // net_ only ever holds a network whose update completed.
        if (!early_stopping()) report_.network = net_;
        report_.ledger = exec_->ledger();
        if (opt_.test && opt_.test->labels)
            report_.test_accuracy = accuracy(predict(report_.network, *opt_.test));
        return std::move(report_);
    }

private:
    bool early_stopping() const { return opt_.validation && cfg_.patience > 0 && !report_.epochs.empty(); }

    std::optional<Matrix> labels_of(const Dataset& d) const {
        if (mode_ == Mode::Supervised) return d.labels;
        return std::nullopt;
    }

    Matrix top_for(const Dataset& d) {
        if (mode_ == Mode::Supervised) return d.inputs;
        return random_latents(net_.dims[net_.depth()], d.size(), opt_.latent_scale, rng_);
    }

    void trace(double e, std::uint64_t iterations) {
        iterations_ += iterations;
        report_.energy_trace.push_back(e);
        report_.trace_iterations.push_back(iterations_);
        report_.trace_smm.push_back(exec_->ledger().smm_count);
    }

    void record_update() {
        if (!opt_.record_loss_per_update) return;
        const double loss = mode_ == Mode::Supervised ? supervised_loss(net_, data_)
                                                      : report_.energy_trace.back();
        report_.updates.push_back({exec_->ledger().smm_count, loss});
    }

    void full_batch() {
        const auto labels = labels_of(data_);
        NetworkState state;
        const bool persistent = cfg_.algorithm == Algorithm::IPC || cfg_.algorithm == Algorithm::PC;
        if (persistent) {
            state = prepare_batch(net_, mode_, data_.inputs, labels, top_for(data_), *exec_);
            trace(energy(state), 0);  // iteration 0: the prepared state
        }

        std::vector<double> per_update;
        for (std::size_t step = 0; step < cfg_.total_steps; ++step) {
            switch (cfg_.algorithm) {
                case Algorithm::IPC: {
                    auto u = ipc_update(net_, state, cfg_, *exec_);
                    net_ = std::move(u.net);
                    state = std::move(u.state);
                    trace(energy(state), 1);
                    break;
                }
                case Algorithm::PC: {
                    auto u = pc_update(net_, state, cfg_, *exec_,
                                       [&](const PCNetwork&, const NetworkState& s) { trace(energy(s), 1); });
                    net_ = std::move(u.net);
                    state = std::move(u.state);
                    break;
                }
                case Algorithm::ZIL: {
                    const auto s = prepare_batch(net_, mode_, data_.inputs, labels, data_.inputs, *exec_);
                    net_ = zil_update(net_, s, cfg_, *exec_);
                    trace(readout_energy(net_, data_.inputs, *data_.labels), net_.depth() - 1);
                    break;
                }
                case Algorithm::BP: {
                    net_ = bp_update(net_, data_.inputs, *data_.labels, cfg_.alpha, cfg_.weight_decay, *exec_);
                    trace(readout_energy(net_, data_.inputs, *data_.labels), 0);
                    break;
                }
            }
            record_update();
            per_update.push_back(report_.energy_trace.back());
            if (opt_.stop_on_plateau &&
                relative_plateau(per_update, cfg_.plateau_window, cfg_.plateau_tolerance))
                break;
        }
        close_epoch(0, per_update.empty() ? 0.0 : per_update.back());
    }

    void mini_batch() {
        const std::size_t n = data_.size();
        const std::size_t L = net_.depth();
        std::vector<Matrix> memory;  // warm-start values per layer, one column per sample
        std::vector<bool> seen;
        const bool warm = cfg_.warm_start && cfg_.algorithm == Algorithm::IPC;
        if (warm) {
            for (std::size_t l = 0; l <= L; ++l) memory.emplace_back(net_.dims[l], n);
            seen.assign(n, false);
        }
        std::size_t since_best = 0;
        double best_val = -1.0;
        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            const auto perm = rng_.permutation(n);
            double energy_sum = 0.0;
            for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
                const std::size_t stop = std::min(n, start + cfg_.batch_size);
                const std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                                   perm.begin() + static_cast<std::ptrdiff_t>(stop));
                const Dataset batch = select(data_, idx);
                energy_sum += run_batch(batch, idx, memory, seen, warm);
            }
            close_epoch(epoch, energy_sum / static_cast<double>(n));
            if (early_stopping()) {
                const double val = report_.epochs.back().validation_accuracy;
                if (val > best_val) {
                    best_val = val;
                    since_best = 0;
                    report_.network = net_;
                    report_.best_epoch = epoch;
                } else if (++since_best >= cfg_.patience) {
                    break;
                }
            }
        }
    }

    // Returns the batch's energy after its last update (loss energy for BP/Z-IL).
    double run_batch(const Dataset& batch, const std::vector<std::size_t>& idx,
                     std::vector<Matrix>& memory, std::vector<bool>& seen, bool warm) {
        const auto labels = labels_of(batch);
        switch (cfg_.algorithm) {
            case Algorithm::BP: {
                net_ = bp_update(net_, batch.inputs, *batch.labels, cfg_.alpha, cfg_.weight_decay, *exec_);
                const double e = readout_energy(net_, batch.inputs, *batch.labels);
                trace(e, 0);
                record_update();
                return e;
            }
            case Algorithm::ZIL: {
                const auto s = prepare_batch(net_, mode_, batch.inputs, labels, batch.inputs, *exec_);
                net_ = zil_update(net_, s, cfg_, *exec_);
                const double e = readout_energy(net_, batch.inputs, *batch.labels);
                trace(e, net_.depth() - 1);
                record_update();
                return e;
            }
            case Algorithm::PC: {
                const auto s = prepare_batch(net_, mode_, batch.inputs, labels, top_for(batch), *exec_);
                auto u = pc_update(net_, s, cfg_, *exec_);
                net_ = std::move(u.net);
                const double e = energy(u.state);
                trace(e, cfg_.T);
                record_update();
                return e;
            }
            case Algorithm::IPC: {
                NetworkState s;
                const bool resume = warm && std::all_of(idx.begin(), idx.end(), [&](auto i) { return seen[i]; });
                if (resume) {
                    s.clamped.assign(net_.depth() + 1, false);
                    for (const auto& m : memory) {
                        s.values.push_back(gather_columns(m, idx));
                        s.errors.emplace_back(m.rows(), idx.size());
                    }
                    s = compute_errors(net_, clamp(s, mode_, batch.inputs, labels), *exec_, PhaseKind::Setup);
                } else {
                    s = prepare_batch(net_, mode_, batch.inputs, labels, top_for(batch), *exec_);
                }
                for (std::size_t t = 0; t < cfg_.T; ++t) {
                    auto u = ipc_update(net_, s, cfg_, *exec_);
                    net_ = std::move(u.net);
                    s = std::move(u.state);
                    record_update();
                }
                if (warm) {
                    for (std::size_t l = 0; l < memory.size(); ++l) scatter_columns(memory[l], s.values[l], idx);
                    for (auto i : idx) seen[i] = true;
                }
                const double e = energy(s);
                trace(e, cfg_.T);
                return e;
            }
        }
        return 0.0;
    }

    void close_epoch(std::size_t epoch, double mean_energy) {
        EpochRecord r;
        r.epoch = epoch;
        if (mode_ == Mode::Supervised) {
            r.train_loss = supervised_loss(net_, data_);
            r.train_accuracy = accuracy(predict(net_, data_));
            if (opt_.validation) r.validation_accuracy = accuracy(predict(net_, *opt_.validation));
            if (opt_.test) r.test_accuracy = accuracy(predict(net_, *opt_.test));
        } else {
            r.train_loss = mean_energy;
        }
        report_.epochs.push_back(r);
        report_.best_epoch = early_stopping() ? report_.best_epoch : epoch;
    }

    PCNetwork net_;
    const Dataset& data_;
    ScheduleConfig cfg_;
    Mode mode_;
    TrainOptions opt_;
    std::unique_ptr<Executor> exec_;
    Rng rng_;
    TrainReport report_;
    std::uint64_t iterations_ = 0;
};

}  // namespace

TrainReport train(const PCNetwork& net, const Dataset& data, const ScheduleConfig& cfg, Mode mode,
                  const TrainOptions& options) {
    return Trainer(net, data, cfg, mode, options).run();
}

}  // namespace pcn
