// pcn: config-driven experiment runner.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pcn/errors.hpp"
#include "pcn/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string engine;
    std::optional<std::size_t> workers;
    bool dry_run = false;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("-c,--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", f.out, "Output directory (overrides config.output)");
    sub->add_option("--seed", f.seed, "Run a single seed instead of config.seeds");
    sub->add_option("--engine", f.engine, "Execution engine")->check(CLI::IsMember({"serial", "parallel"}));
    sub->add_option("--workers", f.workers, "Worker threads for the parallel engine")->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", f.dry_run, "Validate the config and print the plan without running");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive-coding experiments: classify, generate, efficiency, bench, calibrate.\n"
                 "Datasets are read from $PCN_DATA_DIR (default ./data)."};
    app.set_version_flag("--version", pcn::kVersion);
    app.require_subcommand(1);

    Flags flags;
    struct Sub {
        const char* name;
        const char* help;
        pcn::ExperimentKind kind;
    };
    const Sub subs[] = {
        {"classify", "Train classifiers over an algorithm x seed grid; write per-seed CSVs, checkpoints and a summary",
         pcn::ExperimentKind::Classify},
        {"generate", "Train generative models with iPC and PC; write energy-vs-iteration traces",
         pcn::ExperimentKind::Generate},
        {"efficiency", "Training loss as a function of SMMs for iPC, PC and BP", pcn::ExperimentKind::Efficiency},
        {"bench", "SMM count audit and iPC/BP wall-clock ratio sweeps", pcn::ExperimentKind::Bench},
        {"calibrate", "Accuracy and AdaECE under dataset shift for saved checkpoints",
         pcn::ExperimentKind::Calibrate},
    };
    std::optional<pcn::ExperimentKind> chosen;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, flags);
        sub->callback([&chosen, kind = s.kind] { chosen = kind; });
    }
    app.footer("Exit codes: 0 ok, 1 error, 2 config error, 3 divergence, 4 audit failure.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pcn::kExitConfig;
    }

    try {
        auto cfg = pcn::load_config(flags.config);
        if (cfg.kind != *chosen)
            throw pcn::ConfigError("config describes a '" + pcn::to_string(cfg.kind) + "' experiment, not '" +
                                   pcn::to_string(*chosen) + "'");
        pcn::Overrides o;
        if (!flags.out.empty()) o.out = flags.out;
        o.seed = flags.seed;
        if (!flags.engine.empty())
            o.engine = flags.engine == "serial" ? pcn::EngineKind::Serial : pcn::EngineKind::LayerParallel;
        o.workers = flags.workers;
        pcn::apply_overrides(cfg, o);
        return pcn::run_experiment(cfg, flags.dry_run, std::cout);
    } catch (const pcn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return pcn::kExitConfig;
    } catch (const pcn::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return pcn::kExitDivergence;
    } catch (const pcn::AuditError& e) {
        std::cerr << "audit failure: " << e.what() << "\n";
        return pcn::kExitAudit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pcn::kExitFailure;
    }
}
