#include "pcn/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

#include "pcn/errors.hpp"

namespace pcn {

UpdateCost predicted_smm(Algorithm algorithm, std::size_t L, std::size_t T, Mode mode,
                         IpcOrder order) {
    if (L < 1) throw UsageError("predicted_smm: L must be >= 1");
    if (T < 1) throw UsageError("predicted_smm: T must be >= 1");
    // One inference sweep: a value phase over the free layers, an error phase
    // over layers 0..L-1. Generative mode leaves layer L free.
    const std::uint64_t sweep = 2 * L - 1 + (mode == Mode::Generative ? 1 : 0);
    switch (algorithm) {
        case Algorithm::PC: return {sweep * T, 2 * T};
        case Algorithm::IPC:
            return {order == IpcOrder::Snapshot ? sweep : sweep + L,
                    order == IpcOrder::Snapshot ? std::uint64_t{2} : std::uint64_t{3}};
        case Algorithm::ZIL:
            if (mode == Mode::Generative) throw ConfigError("Z-IL needs supervised mode");
            return {sweep * (L - 1), 2 * (L - 1)};
        case Algorithm::BP:
            if (mode == Mode::Generative) throw ConfigError("BP needs supervised mode");
            return {2 * L - 1, 2 * L - 1};
    }
    return {};
}

ParallelStep run_parallel_step(const PCNetwork& net, const NetworkState& state,
                               const ScheduleConfig& cfg, Executor& exec) {
    const StepLedger before = exec.ledger();
    ParallelStep out{net, state, {}};
    switch (cfg.algorithm) {
        case Algorithm::IPC: {
            auto u = ipc_update(net, state, cfg, exec);
            out.net = std::move(u.net);
            out.state = std::move(u.state);
            break;
        }
        case Algorithm::PC: {
            auto u = pc_update(net, state, cfg, exec);
            out.net = std::move(u.net);
            out.state = std::move(u.state);
            break;
        }
        case Algorithm::ZIL: out.net = zil_update(net, state, cfg, exec); break;
        case Algorithm::BP:
            state.validate(net);
            out.net = bp_update(net, state.values[net.depth()], state.values[0], cfg.alpha,
                                cfg.weight_decay, exec);
            break;
    }
    out.delta = exec.ledger() - before;
    return out;
}

ParallelStep run_parallel_step(const PCNetwork& net, const NetworkState& state,
                               const ScheduleConfig& cfg, std::size_t workers) {
    if (workers < 1) throw UsageError("run_parallel_step: workers must be >= 1");
    LayerParallelExecutor exec(workers);
    return run_parallel_step(net, state, cfg, exec);
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <typename F>
double median_ns(std::size_t repeats, F&& body) {
    using clock = std::chrono::steady_clock;
    std::vector<double> samples;
    samples.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = clock::now();
        body();
        samples.push_back(static_cast<double>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count()));
    }
    return median(std::move(samples));
}

}  // namespace

std::vector<BenchRow> bench_update_ratio(const BenchSpec& spec) {
    if (spec.repeats < 10) throw UsageError("bench_update_ratio: repeats must be >= 10");
    if (spec.L < 1 || spec.width < 1 || spec.batch < 1) throw UsageError("bench_update_ratio: empty network");
    const std::size_t in = spec.input ? spec.input : spec.width;
    const std::size_t outw = spec.output ? spec.output : spec.width;
    std::vector<std::size_t> dims(spec.L + 1, spec.width);
    dims.front() = outw;
    dims.back() = in;

    Rng rng(spec.seed);
    const PCNetwork net = PCNetwork::random(dims, Activation::Tanh, rng);
    Matrix input(in, spec.batch), target(outw, spec.batch);
    for (double& v : input.data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : target.data()) v = rng.uniform(-1.0, 1.0);

    ScheduleConfig cfg;
    cfg.algorithm = Algorithm::IPC;
    cfg.gamma = 0.1;
    cfg.alpha = 1e-4;

    const std::size_t workers = spec.workers ? spec.workers : spec.L + 1;
    LayerParallelExecutor par(workers);
    NetworkState state = prepare_batch(net, Mode::Supervised, input, target, input, par);
    PCNetwork ipc_net = net;
    // One untimed warm-up update each, so pools and caches are hot.
    auto ipc_once = [&] {
        auto u = ipc_update(ipc_net, state, cfg, par);
        ipc_net = std::move(u.net);
        state = std::move(u.state);
    };
    ipc_once();
    const double ipc_ns = median_ns(spec.repeats, ipc_once);

    SerialExecutor ser;
    PCNetwork bp_net = net;
    auto bp_once = [&] { bp_net = bp_update(bp_net, input, target, cfg.alpha, 0.0, ser); };
    bp_once();
    const double bp_ns = median_ns(spec.repeats, bp_once);

    BenchRow ipc{"ipc", spec.L, spec.width, workers, ipc_ns,
                 predicted_smm(Algorithm::IPC, spec.L, 1).smm, ipc_ns / bp_ns};
    BenchRow bp{"bp", spec.L, spec.width, 1, bp_ns, predicted_smm(Algorithm::BP, spec.L, 1).smm, 1.0};
    return {ipc, bp};
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
    out << "algorithm,L,width,workers,median_ns_per_update,smm_per_update,ratio_vs_bp\n";
    const auto old = out.precision(10);
    for (const auto& r : rows)
        out << r.algorithm << ',' << r.L << ',' << r.width << ',' << r.workers << ','
            << r.median_ns_per_update << ',' << r.smm_per_update << ',' << r.ratio_vs_bp << '\n';
    out.precision(old);
}

AuditResult count_audit(const TrainReport& report) {
    AuditResult a;
    a.expected = predicted_smm(report.algorithm, report.L, report.T, report.mode, report.ipc_order);
    a.updates = report.ledger.weight_updates;
    const std::string name = to_string(report.algorithm) + " L=" + std::to_string(report.L) +
                             " T=" + std::to_string(report.T);
    if (a.updates == 0) {
        a.message = name + ": no weight updates recorded";
        return a;
    }
    a.observed = {report.ledger.mm_count / a.updates, report.ledger.smm_count / a.updates};
    a.pass = report.ledger.mm_count == a.expected.mm * a.updates &&
             report.ledger.smm_count == a.expected.smm * a.updates;
    a.message = name + ": expected " + std::to_string(a.expected.mm) + " MM / " +
                std::to_string(a.expected.smm) + " SMM per update, observed " +
                std::to_string(report.ledger.mm_count) + " MM / " +
                std::to_string(report.ledger.smm_count) + " SMM over " +
                std::to_string(a.updates) + " updates";
    return a;
}

}  // namespace pcn
