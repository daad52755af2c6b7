#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plastic/corpus/corpus.hpp"
#include "plastic/harness/config.hpp"
#include "plastic/train/metrics.hpp"

namespace plastic::harness {

// Cartesian sweep. Plastic cells are h_ops x w_ops x delays x state_sizes;
// each entry of lstm_units adds baseline cells over the same delays. Every
// cell runs once per seed.
struct Grid {
  std::vector<rules::OpKind> h_ops;
  std::vector<rules::OpKind> w_ops;
  std::vector<int> delays;
  std::vector<int> state_sizes;
  std::vector<std::uint64_t> seeds;
  std::vector<int> lstm_units;
};

std::vector<ExperimentConfig> expand(const Grid& grid, const ExperimentConfig& base);

// Salt separating the initial-state stream from the meta-parameter stream.
inline constexpr std::uint64_t kStateSeedSalt = 0x5eed5eed5eed5eedULL;

struct RunRecord {
  ExperimentConfig config;
  std::filesystem::path dir;
  std::string status;  // "done" or "failed: <reason>"
  double early = 0.0;
  double final = 0.0;
  bool ok() const { return status == "done"; }
};

// One row per cell (all seeds of one configuration).
struct AggregateRow {
  std::string cell;
  std::string model;
  std::string h_op;
  std::string w_op;
  int delay = 0;
  int state_size = 0;  // d_h for plastic cells (d_w if different), units for lstm
  int runs = 0;
  int completed = 0;
  double early_mean = 0.0;
  double early_best = 0.0;
  double final_mean = 0.0;
  double final_best = 0.0;
};

inline constexpr const char* kRunsHeader =
    "cell,model,h_op,w_op,delay,state_size,seed,status,early,final,run_dir";
inline constexpr const char* kAggregateHeader =
    "cell,model,h_op,w_op,delay,state_size,runs,completed,early_mean,early_best,final_mean,final_best";

// <out_dir>/runs/<model>-<cell hash>-s<seed>
std::filesystem::path run_directory(const ExperimentConfig& cfg);

// Trains a single configuration into `dir` (config.txt, metrics.csv,
// checkpoint.bin, status). Returns the metric rows.
std::vector<train::MetricRow> run_experiment(const ExperimentConfig& cfg,
                                             const corpus::SymbolStream& stream,
                                             const std::filesystem::path& dir);

// Runs (or reuses, when its status file says done and force is false) the
// configuration in its content-addressed directory. Failures are recorded in
// the status, never thrown.
RunRecord run_cell(const ExperimentConfig& cfg, bool force);

struct GridOptions {
  int jobs = 1;
  bool force = false;
};

struct GridResult {
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregate;
};

// Runs every expanded configuration, then writes <out_dir>/runs.csv and
// <out_dir>/aggregate.csv.
GridResult run_grid(const Grid& grid, const ExperimentConfig& base, const GridOptions& options = {});

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs);

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

// Loads every run directory under <out_dir>/runs that has a config.txt.
std::vector<RunRecord> scan_runs(const std::filesystem::path& out_dir);

}  // namespace plastic::harness
