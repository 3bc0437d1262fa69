#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pcn/data.hpp"
#include "pcn/executor.hpp"
#include "pcn/schedules.hpp"

namespace pcn {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitDivergence = 3,
    kExitAudit = 4,
};

enum class ExperimentKind { Classify, Generate, Efficiency, Bench, Calibrate };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& name);

struct DatasetSpec {
    std::string source = "idx";  // idx | synthetic
    // idx: directory (relative paths resolve against data_dir()) and file prefixes.
    std::string dir;
    std::string train_prefix = "train";
    std::string test_prefix = "t10k";
    std::size_t train_size = 0;       // 0 keeps every sample
    std::size_t test_size = 0;
    std::size_t validation_size = 0;  // held out of train
    bool stratified = true;
    std::uint64_t subset_seed = 0;
    // synthetic: teacher widths (data width first, latent width last).
    std::vector<std::size_t> synthetic_dims;
    std::size_t synthetic_classes = 0;  // 0: unlabeled teacher data
    std::size_t synthetic_test_size = 0;
    std::uint64_t synthetic_seed = 0;
};

struct NetworkSpec {
    std::vector<std::size_t> hidden;  // widths between output and input (or latent)
    Activation activation = Activation::Tanh;
    std::size_t latent = 0;           // generative top width
};

// One grid cell template: an algorithm with schedule overrides.
struct RunSpec {
    std::string label;
    ScheduleConfig schedule;
    double latent_scale = 1.0;
    bool stop_on_plateau = true;
};

struct BenchConfig {
    std::vector<std::size_t> audit_depths;
    std::vector<std::size_t> audit_T = {1, 8, 12, 16};
    std::size_t audit_width = 4;
    std::size_t audit_updates = 3;
    std::vector<std::size_t> depths;
    std::vector<std::size_t> widths;
    std::size_t batch = 1;
    std::size_t repeats = 10;
};

struct CalibrateConfig {
    std::map<std::string, std::vector<std::string>> checkpoints;  // model -> files
    std::vector<CorruptionKind> corruptions;
    std::vector<int> levels = {1, 2, 3, 4, 5};
    std::string table;  // corruption-table file; empty uses the built-in table
    std::size_t n_bins = 15;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    ExperimentKind kind = ExperimentKind::Classify;
    std::string name;
    DatasetSpec dataset;
    NetworkSpec network;
    std::vector<RunSpec> runs;
    std::vector<std::uint64_t> seeds = {0};
    std::size_t iterations = 0;  // generate: inference-iteration budget per run
    std::size_t smm_budget = 0;  // efficiency: SMM budget per run
    EngineKind engine = EngineKind::Serial;
    std::size_t workers = 1;
    std::string output = "out";
    BenchConfig bench;
    CalibrateConfig calibrate;

    std::string canonical;  // normalized JSON of the source document
    std::uint64_t hash = 0;  // FNV-1a of `canonical`
};

// Parses and validates a JSON document. Unknown keys, wrong types, a missing
// or unsupported schema_version and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Command-line overrides applied after parsing.
struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<EngineKind> engine;
    std::optional<std::size_t> workers;
    bool dry_run = false;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

// Human-readable plan (grid cells, data, outputs); printed by --dry-run.
std::string describe_plan(const ExperimentConfig& cfg);

// "# pcn <version> config_hash=<hex> seed=<seed>" plus newline.
std::string artifact_header(const ExperimentConfig& cfg, const std::string& seed);

struct LoadedData {
    Dataset train;
    std::optional<Dataset> validation;
    std::optional<Dataset> test;
};

LoadedData load_data(const DatasetSpec& spec);

// Network widths for the config and dataset: supervised {classes, hidden...,
// features}; generative {features, hidden..., latent}.
std::vector<std::size_t> network_dims(const ExperimentConfig& cfg, const Dataset& train);

// Each runs the experiment, writes artifacts under cfg.output and logs
// progress to `log`. Return an ExitCode.
int cmd_classify(const ExperimentConfig& cfg, std::ostream& log);
int cmd_generate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_efficiency(const ExperimentConfig& cfg, std::ostream& log);
int cmd_bench(const ExperimentConfig& cfg, std::ostream& log);
int cmd_calibrate(const ExperimentConfig& cfg, std::ostream& log);

// Dispatch on cfg.kind; honours dry_run.
int run_experiment(const ExperimentConfig& cfg, bool dry_run, std::ostream& log);

// Loss at a shared SMM budget: the loss after the last update whose
// cumulative SMM count is <= budget; nullopt before the first update.
std::optional<double> loss_at_budget(const std::vector<UpdateRecord>& curve, std::uint64_t budget);

// Energy after a given number of inference iterations, read from a trace in
// the same way.
std::optional<double> energy_at_iteration(const TrainReport& report, std::uint64_t iteration);

}  // namespace pcn
