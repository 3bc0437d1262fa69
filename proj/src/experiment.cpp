#include "pcn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <locale>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pcn/errors.hpp"
#include "pcn/metrics.hpp"
#include "pcn/parallel.hpp"

namespace pcn {

using json = nlohmann::json;

namespace {

// Typed view of a JSON object that remembers which keys were read, so that
// anything left over can be rejected as unknown.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        if (!has(key)) throw ConfigError(where() + ": missing required key '" + key + "'");
        return convert<T>(key);
    }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) throw ConfigError(where() + ": unknown key '" + key + "'");
    }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : "config." + path_; }

    template <typename T>
    T convert(const std::string& key) {
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
                    throw ConfigError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError(where() + ": key '" + key + "' has the wrong type or range (" + v.dump() + ")");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

IpcOrder parse_ipc_order(const std::string& s) {
    if (s == "snapshot") return IpcOrder::Snapshot;
    if (s == "sequential") return IpcOrder::Sequential;
    throw ConfigError("unknown ipc_order '" + s + "' (expected snapshot or sequential)");
}

EngineKind parse_engine(const std::string& s) {
    if (s == "serial") return EngineKind::Serial;
    if (s == "parallel") return EngineKind::LayerParallel;
    throw ConfigError("unknown engine '" + s + "' (expected serial or parallel)");
}

// Reads schedule keys present in `f` on top of `run`.
void read_schedule(Fields& f, RunSpec& run) {
    auto& s = run.schedule;
    if (f.has("algorithm")) s.algorithm = parse_algorithm(f.raw("algorithm").get<std::string>());
    s.T = f.get<std::size_t>("T", s.T);
    s.gamma = f.get<double>("gamma", s.gamma);
    s.alpha = f.get<double>("alpha", s.alpha);
    s.batch_size = f.get<std::size_t>("batch_size", s.batch_size);
    s.epochs = f.get<std::size_t>("epochs", s.epochs);
    s.total_steps = f.get<std::size_t>("total_steps", s.total_steps);
    s.weight_decay = f.get<double>("weight_decay", s.weight_decay);
    if (f.has("ipc_order")) s.ipc_order = parse_ipc_order(f.raw("ipc_order").get<std::string>());
    s.warm_start = f.get<bool>("warm_start", s.warm_start);
    s.patience = f.get<std::size_t>("patience", s.patience);
    s.plateau_tolerance = f.get<double>("plateau_tolerance", s.plateau_tolerance);
    s.plateau_window = f.get<std::size_t>("plateau_window", s.plateau_window);
    run.stop_on_plateau = f.get<bool>("stop_on_plateau", run.stop_on_plateau);
    run.latent_scale = f.get<double>("latent_scale", run.latent_scale);
}

template <typename T>
std::vector<T> read_list(Fields& f, const std::string& key, std::vector<T> fallback) {
    if (!f.has(key)) return fallback;
    const json& v = f.raw(key);
    if (!v.is_array()) throw ConfigError("config." + f.sub(key) + " must be a list");
    std::vector<T> out;
    for (const auto& e : v) {
        if constexpr (std::is_integral_v<T>) {
            if (!e.is_number_integer() || (std::is_unsigned_v<T> && e.get<long long>() < 0))
                throw ConfigError("config." + f.sub(key) + " must hold non-negative integers");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!e.is_string()) throw ConfigError("config." + f.sub(key) + " must hold strings");
        }
        out.push_back(e.get<T>());
    }
    return out;
}

std::string default_label(const ScheduleConfig& s) {
    std::string label = to_string(s.algorithm);
    if (s.algorithm == Algorithm::PC) label += "-T" + std::to_string(s.T);
    return label;
}

void validate_config(const ExperimentConfig& cfg) {
    const bool needs_runs = cfg.kind != ExperimentKind::Bench && cfg.kind != ExperimentKind::Calibrate;
    if (needs_runs && cfg.runs.empty()) throw ConfigError("config.runs: the run grid is empty");
    if (needs_runs && cfg.seeds.empty()) throw ConfigError("config.seeds: at least one seed is required");
    if (cfg.workers < 1) throw ConfigError("config.engine.workers must be >= 1");
    std::set<std::string> labels;
    for (const auto& r : cfg.runs) {
        if (!labels.insert(r.label).second) throw ConfigError("config.runs: duplicate label '" + r.label + "'");
        if (!(r.latent_scale > 0.0)) throw ConfigError("config.runs: latent_scale must be > 0");
    }
    if (needs_runs && cfg.dataset.source == "idx" && cfg.dataset.dir.empty())
        throw ConfigError("config.dataset.dir is required for idx datasets");
    if (cfg.dataset.source == "synthetic" && cfg.dataset.synthetic_dims.size() < 2)
        throw ConfigError("config.dataset.synthetic_dims needs at least two widths");
    for (std::size_t w : cfg.network.hidden)
        if (w == 0) throw ConfigError("config.network.hidden: zero-width layer");

    switch (cfg.kind) {
        case ExperimentKind::Classify:
            for (const auto& r : cfg.runs) r.schedule.validate(cfg.network.hidden.size() + 1);
            break;
        case ExperimentKind::Generate:
            if (cfg.iterations == 0) throw ConfigError("config.iterations must be > 0 for generate");
            if (cfg.network.latent == 0) throw ConfigError("config.network.latent must be > 0 for generate");
            for (const auto& r : cfg.runs) {
                if (r.schedule.algorithm != Algorithm::IPC && r.schedule.algorithm != Algorithm::PC)
                    throw ConfigError("generate runs must use ipc or pc");
                r.schedule.validate(cfg.network.hidden.size() + 1);
            }
            break;
        case ExperimentKind::Efficiency:
            if (cfg.smm_budget == 0) throw ConfigError("config.smm_budget must be > 0 for efficiency");
            for (const auto& r : cfg.runs) {
                if (r.schedule.batch_size != 0) throw ConfigError("efficiency runs are full batch (batch_size 0)");
                r.schedule.validate(cfg.network.hidden.size() + 1);
            }
            break;
        case ExperimentKind::Bench:
            if (cfg.bench.audit_depths.empty() && cfg.bench.depths.empty())
                throw ConfigError("config.bench: nothing to run (audit_depths and depths are empty)");
            if (!cfg.bench.depths.empty() && cfg.bench.widths.empty())
                throw ConfigError("config.bench.widths is empty");
            for (auto L : cfg.bench.audit_depths)
                if (L < 2) throw ConfigError("config.bench.audit_depths: L must be >= 2");
            for (auto T : cfg.bench.audit_T)
                if (T < 1) throw ConfigError("config.bench.audit_T: T must be >= 1");
            if (cfg.bench.audit_updates < 1) throw ConfigError("config.bench.audit_updates must be >= 1");
            break;
        case ExperimentKind::Calibrate:
            if (cfg.calibrate.checkpoints.empty()) throw ConfigError("config.calibrate.checkpoints is empty");
            for (int l : cfg.calibrate.levels)
                if (l < 1 || l > 5) throw ConfigError("config.calibrate.levels must lie in 1..5");
            if (cfg.calibrate.n_bins < 1) throw ConfigError("config.calibrate.n_bins must be >= 1");
            break;
    }
}

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

std::uint64_t hash_text(const std::string& s) {
    return fnv1a({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::filesystem::path resolve_data_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    return p.is_absolute() ? p : data_dir() / p;
}

// Opens an artifact for writing with the provenance header line.
std::ofstream open_artifact(const ExperimentConfig& cfg, const std::string& file, const std::string& seed) {
    std::filesystem::create_directories(cfg.output);
    const auto path = std::filesystem::path(cfg.output) / file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out.imbue(std::locale::classic());
    out.precision(10);
    out << artifact_header(cfg, seed);
    return out;
}

std::string seed_list(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(seeds[i]);
    return s;
}

PCNetwork initial_network(const ExperimentConfig& cfg, const std::vector<std::size_t>& dims,
                          std::uint64_t seed) {
    Rng rng = Rng(seed).split(0x6e6574);
    return PCNetwork::random(dims, cfg.network.activation, rng);
}

TrainOptions options_for(const ExperimentConfig& cfg, const RunSpec& run, const LoadedData& data) {
    TrainOptions o;
    o.engine = cfg.engine;
    o.workers = cfg.workers;
    o.validation = data.validation ? &*data.validation : nullptr;
    o.test = data.test ? &*data.test : nullptr;
    o.latent_scale = run.latent_scale;
    o.stop_on_plateau = run.stop_on_plateau;
    return o;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Classify: return "classify";
        case ExperimentKind::Generate: return "generate";
        case ExperimentKind::Efficiency: return "efficiency";
        case ExperimentKind::Bench: return "bench";
        case ExperimentKind::Calibrate: return "calibrate";
    }
    return "unknown";
}

ExperimentKind parse_experiment(const std::string& name) {
    if (name == "classify") return ExperimentKind::Classify;
    if (name == "generate") return ExperimentKind::Generate;
    if (name == "efficiency") return ExperimentKind::Efficiency;
    if (name == "bench" || name == "bench-smm" || name == "bench-wallclock") return ExperimentKind::Bench;
    if (name == "calibrate") return ExperimentKind::Calibrate;
    throw ConfigError("unknown experiment '" + name + "'");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    Fields top(doc, "");
    cfg.schema_version = top.require<int>("schema_version");
    if (cfg.schema_version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version) +
                          " (this build reads " + std::to_string(kSchemaVersion) + ")");
    cfg.kind = parse_experiment(top.require<std::string>("experiment"));
    cfg.name = top.get<std::string>("name", to_string(cfg.kind));
    cfg.output = top.get<std::string>("output", cfg.output);
    cfg.iterations = top.get<std::size_t>("iterations", 0);
    cfg.smm_budget = top.get<std::size_t>("smm_budget", 0);
    cfg.seeds = read_list<std::uint64_t>(top, "seeds", cfg.seeds);

    if (top.has("dataset")) {
        Fields f(top.raw("dataset"), "dataset");
        auto& d = cfg.dataset;
        d.source = f.get<std::string>("source", d.source);
        if (d.source != "idx" && d.source != "synthetic")
            throw ConfigError("config.dataset.source must be idx or synthetic");
        d.dir = f.get<std::string>("dir", d.dir);
        d.train_prefix = f.get<std::string>("train_prefix", d.train_prefix);
        d.test_prefix = f.get<std::string>("test_prefix", d.test_prefix);
        d.train_size = f.get<std::size_t>("train_size", d.train_size);
        d.test_size = f.get<std::size_t>("test_size", d.test_size);
        d.validation_size = f.get<std::size_t>("validation_size", d.validation_size);
        d.stratified = f.get<bool>("stratified", d.stratified);
        d.subset_seed = f.get<std::uint64_t>("subset_seed", d.subset_seed);
        d.synthetic_dims = read_list<std::size_t>(f, "synthetic_dims", {});
        d.synthetic_classes = f.get<std::size_t>("synthetic_classes", 0);
        d.synthetic_test_size = f.get<std::size_t>("synthetic_test_size", 0);
        d.synthetic_seed = f.get<std::uint64_t>("synthetic_seed", 0);
        f.finish();
    }
    if (top.has("network")) {
        Fields f(top.raw("network"), "network");
        cfg.network.hidden = read_list<std::size_t>(f, "hidden", {});
        cfg.network.activation = parse_activation(f.get<std::string>("activation", "tanh"));
        cfg.network.latent = f.get<std::size_t>("latent", 0);
        f.finish();
    }
    RunSpec base;
    if (top.has("schedule")) {
        Fields f(top.raw("schedule"), "schedule");
        read_schedule(f, base);
        f.finish();
    }
    if (top.has("runs")) {
        const json& runs = top.raw("runs");
        if (!runs.is_array()) throw ConfigError("config.runs must be a list");
        for (std::size_t i = 0; i < runs.size(); ++i) {
            Fields f(runs[i], "runs[" + std::to_string(i) + "]");
            RunSpec run = base;
            f.require<std::string>("algorithm");
            read_schedule(f, run);
            run.label = f.get<std::string>("label", default_label(run.schedule));
            f.finish();
            cfg.runs.push_back(std::move(run));
        }
    }
    if (top.has("engine")) {
        Fields f(top.raw("engine"), "engine");
        cfg.engine = parse_engine(f.get<std::string>("kind", "serial"));
        cfg.workers = f.get<std::size_t>("workers", 1);
        f.finish();
    }
    if (top.has("bench")) {
        Fields f(top.raw("bench"), "bench");
        auto& b = cfg.bench;
        b.audit_depths = read_list<std::size_t>(f, "audit_depths", b.audit_depths);
        b.audit_T = read_list<std::size_t>(f, "audit_T", b.audit_T);
        b.audit_width = f.get<std::size_t>("audit_width", b.audit_width);
        b.audit_updates = f.get<std::size_t>("audit_updates", b.audit_updates);
        b.depths = read_list<std::size_t>(f, "depths", b.depths);
        b.widths = read_list<std::size_t>(f, "widths", b.widths);
        b.batch = f.get<std::size_t>("batch", b.batch);
        b.repeats = f.get<std::size_t>("repeats", b.repeats);
        f.finish();
    }
    if (top.has("calibrate")) {
        Fields f(top.raw("calibrate"), "calibrate");
        auto& c = cfg.calibrate;
        if (f.has("checkpoints")) {
            const json& m = f.raw("checkpoints");
            if (!m.is_object()) throw ConfigError("config.calibrate.checkpoints must map model names to files");
            for (const auto& [model, files] : m.items()) {
                if (files.is_string()) {
                    c.checkpoints[model].push_back(files.get<std::string>());
                } else if (files.is_array()) {
                    for (const auto& p : files) {
                        if (!p.is_string()) throw ConfigError("config.calibrate.checkpoints: paths must be strings");
                        c.checkpoints[model].push_back(p.get<std::string>());
                    }
                } else {
                    throw ConfigError("config.calibrate.checkpoints: expected a path or a list of paths");
                }
            }
        }
        for (const auto& name : read_list<std::string>(f, "corruptions", {}))
            c.corruptions.push_back(parse_corruption(name));
        if (c.corruptions.empty()) c.corruptions = all_corruptions();
        c.levels = read_list<int>(f, "levels", c.levels);
        c.table = f.get<std::string>("table", c.table);
        c.n_bins = f.get<std::size_t>("n_bins", c.n_bins);
        c.seed = f.get<std::uint64_t>("seed", c.seed);
        f.finish();
    }
    top.finish();
    validate_config(cfg);
    cfg.canonical = doc.dump();
    cfg.hash = hash_text(cfg.canonical);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return parse_config(s.str());
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
    json doc = json::parse(cfg.canonical);
    if (o.out) cfg.output = *o.out;  // location only; does not change results
    if (o.seed) {
        cfg.seeds = {*o.seed};
        doc["seeds"] = cfg.seeds;
    }
    if (o.engine) {
        cfg.engine = *o.engine;
        doc["engine"]["kind"] = cfg.engine == EngineKind::Serial ? "serial" : "parallel";
    }
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers must be >= 1");
        cfg.workers = *o.workers;
        doc["engine"]["workers"] = cfg.workers;
    }
    cfg.canonical = doc.dump();
    cfg.hash = hash_text(cfg.canonical);
}

std::string artifact_header(const ExperimentConfig& cfg, const std::string& seed) {
    return std::string("# pcn ") + kVersion + " config_hash=" + hex(cfg.hash) + " seed=" + seed + "\n";
}

std::string describe_plan(const ExperimentConfig& cfg) {
    std::ostringstream s;
    s << "experiment " << to_string(cfg.kind) << " '" << cfg.name << "' (config_hash " << hex(cfg.hash)
      << ")\n";
    s << "  output: " << cfg.output << "\n";
    s << "  engine: " << (cfg.engine == EngineKind::Serial ? "serial" : "parallel") << ", workers "
      << cfg.workers << "\n";
    if (cfg.kind != ExperimentKind::Bench) {
        const auto& d = cfg.dataset;
        s << "  dataset: " << d.source;
        if (d.source == "idx") s << " " << resolve_data_dir(d.dir).string();
        if (d.train_size) s << ", train_size " << d.train_size;
        if (d.test_size) s << ", test_size " << d.test_size;
        if (d.validation_size) s << ", validation_size " << d.validation_size;
        s << "\n";
    }
    for (const auto& r : cfg.runs) {
        const auto& c = r.schedule;
        s << "  run " << r.label << ": " << to_string(c.algorithm) << " T=" << c.T << " gamma=" << c.gamma
          << " alpha=" << c.alpha << " batch=" << c.batch_size << " epochs=" << c.epochs
          << " steps=" << c.total_steps << " x " << cfg.seeds.size() << " seed(s)\n";
    }
    if (cfg.kind == ExperimentKind::Bench)
        s << "  audit depths " << cfg.bench.audit_depths.size() << ", ratio cells "
          << cfg.bench.depths.size() * cfg.bench.widths.size() << "\n";
    if (cfg.kind == ExperimentKind::Calibrate)
        for (const auto& [model, files] : cfg.calibrate.checkpoints)
            s << "  model " << model << ": " << files.size() << " checkpoint(s)\n";
    return s.str();
}

LoadedData load_data(const DatasetSpec& spec) {
    LoadedData out;
    if (spec.source == "synthetic") {
        const std::size_t n = spec.train_size + spec.synthetic_test_size;
        if (n == 0) throw ConfigError("config.dataset.train_size must be > 0 for synthetic data");
        Dataset all = spec.synthetic_classes
                          ? synthetic_classification(n, spec.synthetic_dims, spec.synthetic_classes,
                                                     spec.synthetic_seed)
                          : synthetic_generative(n, spec.synthetic_dims, spec.synthetic_seed);
        if (spec.synthetic_test_size) {
            auto [kept, held] = split(all, spec.synthetic_test_size, spec.subset_seed);
            out.train = std::move(kept);
            out.test = std::move(held);
        } else {
            out.train = std::move(all);
        }
    } else {
        const auto dir = resolve_data_dir(spec.dir);
        if (!std::filesystem::is_directory(dir))
            throw UsageError("dataset directory '" + dir.string() +
                             "' not found (set PCN_DATA_DIR or fetch the data; see README)");
        out.train = load_idx_dataset(dir, spec.train_prefix, spec.dir);
        if (spec.train_size)
            out.train = subset(out.train, spec.train_size, spec.subset_seed, spec.stratified);
        if (!spec.test_prefix.empty()) {
            Dataset test = load_idx_dataset(dir, spec.test_prefix, spec.dir + "-test");
            if (spec.test_size) test = subset(test, spec.test_size, spec.subset_seed + 1, spec.stratified);
            out.test = std::move(test);
        }
    }
    if (spec.validation_size) {
        auto [kept, held] = split(out.train, spec.validation_size, spec.subset_seed + 2);
        out.train = std::move(kept);
        out.validation = std::move(held);
    }
    return out;
}

std::vector<std::size_t> network_dims(const ExperimentConfig& cfg, const Dataset& train) {
    std::vector<std::size_t> dims;
    if (cfg.kind == ExperimentKind::Generate) {
        dims.push_back(train.features());
        dims.insert(dims.end(), cfg.network.hidden.begin(), cfg.network.hidden.end());
        dims.push_back(cfg.network.latent);
    } else {
        if (!train.labels) throw UsageError("dataset '" + train.name + "' has no labels");
        dims.push_back(train.num_classes());
        dims.insert(dims.end(), cfg.network.hidden.begin(), cfg.network.hidden.end());
        dims.push_back(train.features());
    }
    return dims;
}

int cmd_classify(const ExperimentConfig& cfg, std::ostream& log) {
    const LoadedData data = load_data(cfg.dataset);
    if (!data.test) throw ConfigError("classify needs a test set (dataset.test_prefix)");
    const auto dims = network_dims(cfg, data.train);
    bool any_diverged = false;

    auto summary = open_artifact(cfg, "summary.csv", seed_list(cfg.seeds));
    summary << "label,algorithm,T,seeds,mean_test_accuracy,std_test_accuracy,diverged\n";
    for (const auto& run : cfg.runs) {
        std::vector<double> acc;
        std::size_t diverged = 0;
        for (auto seed : cfg.seeds) {
            ScheduleConfig sched = run.schedule;
            sched.seed = seed;
            const auto report = train(initial_network(cfg, dims, seed), data.train, sched,
                                      Mode::Supervised, options_for(cfg, run, data));
            const std::string stem = run.label + "_seed" + std::to_string(seed);
            auto out = open_artifact(cfg, stem + ".csv", std::to_string(seed));
            out << "epoch,train_loss,train_accuracy,validation_accuracy,test_accuracy\n";
            for (const auto& e : report.epochs)
                out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ','
                    << e.validation_accuracy << ',' << e.test_accuracy << '\n';
            save_network(report.network, (std::filesystem::path(cfg.output) / (stem + ".pcnckpt")).string());
            if (report.diverged) {
                ++diverged;
                any_diverged = true;
                log << run.label << " seed " << seed << ": diverged (" << report.divergence << ")\n";
            } else {
                acc.push_back(report.test_accuracy);
                log << run.label << " seed " << seed << ": test accuracy " << report.test_accuracy
                    << " (best epoch " << report.best_epoch << ")\n";
            }
        }
        summary << run.label << ',' << to_string(run.schedule.algorithm) << ',' << run.schedule.T << ','
                << cfg.seeds.size() << ',' << mean(acc) << ',' << stddev(acc) << ',' << diverged << '\n';
        log << run.label << ": mean " << mean(acc) << " +- " << stddev(acc) << "\n";
    }
    return any_diverged ? kExitDivergence : kExitOk;
}

int cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
    const LoadedData data = load_data(cfg.dataset);
    const auto dims = network_dims(cfg, data.train);
    bool any_diverged = false;

    auto traces = open_artifact(cfg, "traces.csv", seed_list(cfg.seeds));
    traces << "label,algorithm,T,seed,iteration,smm,energy\n";
    auto summary = open_artifact(cfg, "generate_summary.csv", seed_list(cfg.seeds));
    summary << "label,algorithm,T,seed,iterations,final_energy,diverged\n";
    for (const auto& run : cfg.runs) {
        for (auto seed : cfg.seeds) {
            ScheduleConfig sched = run.schedule;
            sched.seed = seed;
            sched.batch_size = 0;
            const std::size_t per = sched.algorithm == Algorithm::PC ? sched.T : 1;
            sched.total_steps = (cfg.iterations + per - 1) / per;
            const auto report = train(initial_network(cfg, dims, seed), data.train, sched,
                                      Mode::Generative, options_for(cfg, run, data));
            for (std::size_t i = 0; i < report.energy_trace.size(); ++i)
                traces << run.label << ',' << to_string(sched.algorithm) << ',' << sched.T << ',' << seed
                       << ',' << report.trace_iterations[i] << ',' << report.trace_smm[i] << ','
                       << report.energy_trace[i] << '\n';
            const double last = report.energy_trace.empty() ? NAN : report.energy_trace.back();
            const auto iters = report.trace_iterations.empty() ? 0 : report.trace_iterations.back();
            summary << run.label << ',' << to_string(sched.algorithm) << ',' << sched.T << ',' << seed
                    << ',' << iters << ',' << last << ',' << (report.diverged ? 1 : 0) << '\n';
            any_diverged |= report.diverged;
            log << run.label << " seed " << seed << ": " << iters << " iterations, energy " << last
                << (report.diverged ? " (diverged)" : "") << "\n";
        }
    }
    return any_diverged ? kExitDivergence : kExitOk;
}

int cmd_efficiency(const ExperimentConfig& cfg, std::ostream& log) {
    const LoadedData data = load_data(cfg.dataset);
    const auto dims = network_dims(cfg, data.train);
    const std::size_t L = dims.size() - 1;
    bool any_diverged = false;

    auto curves = open_artifact(cfg, "efficiency.csv", seed_list(cfg.seeds));
    curves << "label,algorithm,T,seed,update,smm,loss\n";
    for (const auto& run : cfg.runs) {
        for (auto seed : cfg.seeds) {
            ScheduleConfig sched = run.schedule;
            sched.seed = seed;
            const auto cost = predicted_smm(sched.algorithm, L, sched.T, Mode::Supervised, sched.ipc_order);
            sched.total_steps = cfg.smm_budget / cost.smm;
            TrainOptions opt = options_for(cfg, run, data);
            opt.record_loss_per_update = true;
            opt.stop_on_plateau = false;
            const PCNetwork net = initial_network(cfg, dims, seed);
            const auto report = train(net, data.train, sched, Mode::Supervised, opt);
            curves << run.label << ',' << to_string(sched.algorithm) << ',' << sched.T << ',' << seed
                   << ",0,0," << supervised_loss(net, data.train) << '\n';
            for (std::size_t i = 0; i < report.updates.size(); ++i)
                curves << run.label << ',' << to_string(sched.algorithm) << ',' << sched.T << ',' << seed
                       << ',' << i + 1 << ',' << report.updates[i].smm << ',' << report.updates[i].loss
                       << '\n';
            any_diverged |= report.diverged;
            log << run.label << " seed " << seed << ": " << report.updates.size() << " updates, final loss "
                << (report.updates.empty() ? NAN : report.updates.back().loss)
                << (report.diverged ? " (diverged)" : "") << "\n";
        }
    }
    return any_diverged ? kExitDivergence : kExitOk;
}

int cmd_bench(const ExperimentConfig& cfg, std::ostream& log) {
    const auto& b = cfg.bench;
    bool audit_ok = true;
    if (!b.audit_depths.empty()) {
        auto audit = open_artifact(cfg, "audit.csv", seed_list(cfg.seeds));
        audit << "algorithm,L,T,updates,expected_mm,observed_mm,expected_smm,observed_smm,pass\n";
        const std::size_t w = b.audit_width;
        for (auto L : b.audit_depths) {
            Rng rng(cfg.seeds.empty() ? 0 : cfg.seeds.front());
            Matrix inputs(w, 4);
            for (double& v : inputs.data()) v = rng.uniform();
            const std::vector<std::size_t> classes = {0, 1 % w, 2 % w, 3 % w};
            const Dataset d = make_labeled("audit", inputs, classes, w);
            const PCNetwork net = PCNetwork::random(std::vector<std::size_t>(L + 1, w), Activation::Tanh, rng);

            std::vector<ScheduleConfig> cells;
            ScheduleConfig c;
            c.total_steps = b.audit_updates;
            c.gamma = 0.1;
            c.alpha = 1e-3;
            c.algorithm = Algorithm::IPC;
            cells.push_back(c);
            for (auto T : b.audit_T) {
                c.algorithm = Algorithm::PC;
                c.T = T;
                cells.push_back(c);
            }
            c.T = 1;
            c.algorithm = Algorithm::ZIL;
            c.gamma = 1.0;
            cells.push_back(c);
            c.algorithm = Algorithm::BP;
            cells.push_back(c);

            for (const auto& cell : cells) {
                TrainOptions opt;
                opt.engine = cfg.engine;
                opt.workers = cfg.workers;
                opt.stop_on_plateau = false;
                const auto a = count_audit(train(net, d, cell, Mode::Supervised, opt));
                audit << to_string(cell.algorithm) << ',' << L << ',' << cell.T << ',' << a.updates << ','
                      << a.expected.mm << ',' << a.observed.mm << ',' << a.expected.smm << ','
                      << a.observed.smm << ',' << (a.pass ? 1 : 0) << '\n';
                if (!a.pass) {
                    audit_ok = false;
                    log << "AUDIT FAILURE " << a.message << "\n";
                }
            }
        }
        log << "count audit: " << (audit_ok ? "all cells pass" : "FAILURES") << "\n";
    }

    if (!b.depths.empty()) {
        std::size_t repeats = b.repeats;
        if (repeats < 10) {
            log << "warning: repeats = " << repeats << " gives high-variance medians; using 10\n";
            repeats = 10;
        }
        auto ratio = open_artifact(cfg, "ratio.csv", seed_list(cfg.seeds));
        std::vector<BenchRow> all;
        for (auto L : b.depths) {
            std::vector<double> trend;
            for (auto width : b.widths) {
                BenchSpec spec;
                spec.L = L;
                spec.width = width;
                spec.batch = b.batch;
                spec.repeats = repeats;
                spec.workers = cfg.engine == EngineKind::Serial ? 1 : cfg.workers;
                spec.seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
                const auto rows = bench_update_ratio(spec);
                all.insert(all.end(), rows.begin(), rows.end());
                trend.push_back(rows.front().ratio_vs_bp);
                log << "L=" << L << " width=" << width << ": ipc/bp = " << rows.front().ratio_vs_bp << "\n";
            }
            const bool monotone = std::is_sorted(trend.rbegin(), trend.rend());
            const bool crosses = !trend.empty() && *std::min_element(trend.begin(), trend.end()) < 1.0;
            log << "trend at L=" << L << ": " << (monotone ? "non-increasing in width" : "not monotone")
                << ", " << (crosses ? "crosses below 1" : "stays >= 1") << " (informational)\n";
        }
        write_bench_csv(ratio, all);
    }
    return audit_ok ? kExitOk : kExitAudit;
}

int cmd_calibrate(const ExperimentConfig& cfg, std::ostream& log) {
    const LoadedData data = load_data(cfg.dataset);
    if (!data.test) throw ConfigError("calibrate needs a test set (dataset.test_prefix)");
    const auto& c = cfg.calibrate;
    CorruptionTable table = CorruptionTable::defaults();
    if (!c.table.empty()) {
        std::ifstream in(c.table);
        if (!in) throw UsageError("cannot open corruption table '" + c.table + "'");
        std::ostringstream s;
        s << in.rdbuf();
        table = CorruptionTable::parse(s.str());
    }
    std::vector<ShiftRow> rows;
    for (const auto& [model, files] : c.checkpoints) {
        for (const auto& file : files) {
            std::filesystem::path p(file);
            if (p.is_relative() && std::filesystem::exists(std::filesystem::path(cfg.output) / p))
                p = std::filesystem::path(cfg.output) / p;
            if (!std::filesystem::exists(p))
                throw UsageError("missing checkpoint '" + file + "' for model '" + model + "'");
            const PCNetwork net = load_network(p.string());
            const auto part = shift_study(net, *data.test, c.corruptions, c.levels, model, table, c.seed, c.n_bins);
            log << model << " (" << p.filename().string() << "): clean accuracy " << part.front().accuracy
                << ", AdaECE " << part.front().ada_ece << "\n";
            rows.insert(rows.end(), part.begin(), part.end());
        }
    }
    auto shift = open_artifact(cfg, "shift.csv", std::to_string(c.seed));
    write_shift_csv(shift, rows);

    auto summary = open_artifact(cfg, "calibration_summary.csv", std::to_string(c.seed));
    summary << "model,level,median_accuracy,median_ada_ece\n";
    std::vector<int> levels = {0};
    levels.insert(levels.end(), c.levels.begin(), c.levels.end());
    for (const auto& [model, _] : c.checkpoints)
        for (int level : levels)
            summary << model << ',' << level << ',' << median_metric(rows, model, level, false) << ','
                    << median_metric(rows, model, level, true) << '\n';

    if (c.checkpoints.count("ipc") && c.checkpoints.count("bp")) {
        for (int level : c.levels) {
            const double ipc = median_metric(rows, "ipc", level, true);
            const double bp = median_metric(rows, "bp", level, true);
            log << "level " << level << ": median AdaECE ipc " << ipc << " vs bp " << bp
                << (ipc <= bp ? "" : "  [warning: ipc above bp]") << "\n";
        }
    }
    return kExitOk;
}

int run_experiment(const ExperimentConfig& cfg, bool dry_run, std::ostream& log) {
    if (dry_run) {
        log << describe_plan(cfg) << "dry run: configuration valid, nothing executed\n";
        return kExitOk;
    }
    switch (cfg.kind) {
        case ExperimentKind::Classify: return cmd_classify(cfg, log);
        case ExperimentKind::Generate: return cmd_generate(cfg, log);
        case ExperimentKind::Efficiency: return cmd_efficiency(cfg, log);
        case ExperimentKind::Bench: return cmd_bench(cfg, log);
        case ExperimentKind::Calibrate: return cmd_calibrate(cfg, log);
    }
    return kExitFailure;
}

std::optional<double> loss_at_budget(const std::vector<UpdateRecord>& curve, std::uint64_t budget) {
    std::optional<double> out;
    for (const auto& r : curve) {
        if (r.smm > budget) break;
        out = r.loss;
    }
    return out;
}

std::optional<double> energy_at_iteration(const TrainReport& report, std::uint64_t iteration) {
    std::optional<double> out;
    for (std::size_t i = 0; i < report.energy_trace.size(); ++i) {
        if (report.trace_iterations[i] > iteration) break;
        out = report.energy_trace[i];
    }
    return out;
}

}  // namespace pcn
