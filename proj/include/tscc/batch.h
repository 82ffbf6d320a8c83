#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscc/analysis.h"
#include "tscc/engine.h"

namespace tscc {

inline constexpr const char *kCodeVersion = "tscc 1.0.0";

class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// One (p, L) cell of a batch.
struct RunConfig {
    std::string name;
    double p = 0;
    int L = 9;
    uint32_t n_samples = 1;
    int b = 10;
    double T_min = 1.0;
    double T_max = 2.0;
    uint32_t N_T = 16;
    uint64_t seed = 1;
    uint32_t measurement_interval = 4;
    int cap_extra = 3;

    /// Throws ConfigError naming the violated constraint.
    void validate() const;
    /// Nominal sweeps of all rungs and samples: N_sa * N_T * 2 * 2^b.
    double estimated_sweeps() const;
    TemperatureLadder ladder() const;
    RunSettings settings() const;
    std::string cell_name() const;
    bool operator==(const RunConfig &) const = default;
};

/// A parsed config file: global options plus the expanded cells.
struct BatchConfig {
    std::vector<RunConfig> runs;
    std::optional<uint32_t> workers;
    std::optional<std::string> out_dir;
    std::string description;
};

/// Flat key = value text. Top-level keys: workers, out, seed, description. Each [run] block takes
/// name, p, L, n_samples, b, T_min, T_max, N_T, seed, measurement_interval, cap_extra; p and L accept
/// comma-separated lists that expand to their product. Unknown keys, duplicates, and invalid values
/// are rejected with the line number.
BatchConfig parse_config(const std::string &text);
BatchConfig load_config(const std::filesystem::path &path);
/// Config text that parses back to the same runs.
std::string format_config(const BatchConfig &cfg);

struct Preset {
    std::string name;
    std::string description;
    std::vector<RunConfig> runs;
};
std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
Preset preset(const std::string &name);
/// The Table I row a desk-scale config shrinks (same p regime and L); nullopt if none.
std::optional<RunConfig> table1_counterpart(const RunConfig &cfg);

uint64_t sample_seed(uint64_t master, double p, int L, uint32_t index);

struct BatchOptions {
    std::filesystem::path out_dir = "out";
    uint32_t workers = 1;
    bool resume = false;
    /// Sweeps between checkpoints of a running sample.
    uint64_t checkpoint_interval = 1u << 14;
    /// Stop each cell after this many sweeps in this invocation (checkpointed, left pending).
    std::optional<uint64_t> sweep_budget;
    /// Polled between sweep chunks; when set, running cells checkpoint and stop.
    const std::atomic<bool> *stop = nullptr;
};

struct BatchSummary {
    uint32_t cells = 0;
    uint32_t skipped = 0;
    uint32_t done = 0;
    uint32_t unequilibrated = 0;
    uint32_t pending = 0;
    uint32_t failed = 0;
};

/// Runs every (config, sample) cell, writing one JSON file per sample, an observables.csv per
/// (p, L) directory, and manifest.json. Completed cells recorded in the manifest are skipped.
/// Outputs do not depend on the worker count.
BatchSummary run_batch(const std::vector<RunConfig> &configs, const BatchOptions &opt);

/// Serialized per-sample result.
std::string sample_json(const RunConfig &cfg, uint32_t index, uint64_t seed, const SampleResult &r);

struct AnalyzeOptions {
    uint32_t n_resample = 500;
    uint64_t seed = 0;
    bool svg = true;
    bool sensitivity = true;
};

struct AnalyzeReport {
    std::vector<std::string> gaps;
    std::vector<CrossingEstimate> crossings;
    std::optional<PhaseBoundary> boundary;
    std::optional<ThresholdEstimate> threshold;
    std::string threshold_status;
};

/// Reads observables.csv files below `dir` and writes crossings.csv, boundary.csv, threshold.json,
/// gaps.txt, sensitivity.csv and SVG plots into it.
AnalyzeReport analyze(const std::filesystem::path &dir, const AnalyzeOptions &opt = {});

/// Ensembles read back from the observables.csv files below `dir`, ordered by (p, L).
std::vector<DisorderEnsemble> load_ensembles(const std::filesystem::path &dir);
void write_observables_csv(const std::filesystem::path &path, const DisorderEnsemble &ens);

/// Human-readable status of a batch directory.
std::string batch_report(const std::filesystem::path &dir);

}  // namespace tscc
