#include "plastic/harness/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "plastic/baseline/lstm_lm.hpp"
#include "plastic/train/plastic_model.hpp"
#include "plastic/train/trainer.hpp"

namespace plastic::harness {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void fill_losses(RunRecord& r) {
  const auto rows = train::read_metrics(r.dir / "metrics.csv");
  r.early = train::early_loss(rows, r.config.train.early_window);
  r.final = train::final_loss(rows, r.config.train.final_window);
}

int state_size_of(const ExperimentConfig& cfg) {
  return cfg.model == ModelKind::kLstm ? cfg.lstm.units : cfg.network.d_h;
}

}  // namespace

std::vector<ExperimentConfig> expand(const Grid& grid, const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  const std::vector<int> delays = grid.delays.empty() ? std::vector<int>{base.train.delay} : grid.delays;
  const std::vector<std::uint64_t> seeds =
      grid.seeds.empty() ? std::vector<std::uint64_t>{base.train.seed} : grid.seeds;
  const std::vector<int> sizes =
      grid.state_sizes.empty() ? std::vector<int>{base.network.d_h} : grid.state_sizes;
  for (auto h : grid.h_ops) {
    for (auto w : grid.w_ops) {
      for (int d : delays) {
        for (int s : sizes) {
          for (auto seed : seeds) {
            ExperimentConfig c = base;
            c.model = ModelKind::kPlastic;
            c.network.h_op = h;
            c.network.w_op = w;
            c.network.d_h = c.network.d_w = s;
            c.train.delay = d;
            c.train.seed = seed;
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  for (int units : grid.lstm_units) {
    for (int d : delays) {
      for (auto seed : seeds) {
        ExperimentConfig c = base;
        c.model = ModelKind::kLstm;
        c.lstm.units = units;
        c.train.delay = d;
        c.train.seed = seed;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

std::filesystem::path run_directory(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "runs" /
         (std::string(model_name(cfg.model)) + "-" + cell_hash(cfg) + "-s" +
          std::to_string(cfg.train.seed));
}

std::vector<train::MetricRow> run_experiment(const ExperimentConfig& cfg,
                                             const corpus::SymbolStream& stream,
                                             const std::filesystem::path& dir) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "metrics.csv");
  const std::string text = render_config(cfg);
  write_file(dir / "config.txt", text);
  const train::RunOptions options{dir, text};
  const std::uint64_t seed = cfg.train.seed;
  if (cfg.model == ModelKind::kLstm) {
    baseline::LstmLanguageModel model(cfg.lstm, seed);
    return train::run_training(model, model.initial_state(), stream, cfg.train, options);
  }
  train::PlasticModel model(net::Network(cfg.network, seed));
  auto state = model.network().init_state(seed ^ kStateSeedSalt);
  return train::run_training(model, std::move(state), stream, cfg.train, options);
}

RunRecord run_cell(const ExperimentConfig& cfg, bool force) {
  RunRecord r;
  r.config = cfg;
  r.dir = run_directory(cfg);
  const auto status_path = r.dir / "status";
  if (!force && std::filesystem::exists(status_path) && read_file(status_path) == "done") {
    r.status = "done";
    fill_losses(r);
    return r;
  }
  try {
    std::filesystem::remove_all(r.dir);
    const auto stream = corpus::load_corpus_file(cfg.corpus_path);
    run_experiment(cfg, stream, r.dir);
    r.status = "done";
    fill_losses(r);
  } catch (const std::exception& e) {
    r.status = std::string("failed: ") + e.what();
    r.early = r.final = std::numeric_limits<double>::quiet_NaN();
  }
  std::filesystem::create_directories(r.dir);
  write_file(status_path, r.status);
  return r;
}

GridResult run_grid(const Grid& grid, const ExperimentConfig& base, const GridOptions& options) {
  const auto configs = expand(grid, base);
  GridResult result;
  result.runs.resize(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      result.runs[i] = run_cell(configs[i], options.force);
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.aggregate = aggregate(result.runs);
  std::filesystem::create_directories(base.out_dir);
  write_runs_csv(std::filesystem::path(base.out_dir) / "runs.csv", result.runs);
  write_aggregate_csv(std::filesystem::path(base.out_dir) / "aggregate.csv", result.aggregate);
  return result;
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs) {
  std::vector<AggregateRow> rows;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<const RunRecord*>> members;
  for (const auto& r : runs) {
    const std::string cell = std::string(model_name(r.config.model)) + "-" + cell_hash(r.config);
    auto [it, inserted] = index.emplace(cell, rows.size());
    if (inserted) {
      AggregateRow a;
      a.cell = cell;
      a.model = model_name(r.config.model);
      const bool lstm = r.config.model == ModelKind::kLstm;
      a.h_op = lstm ? "-" : std::string(rules::op_name(r.config.network.h_op));
      a.w_op = lstm ? "-" : std::string(rules::op_name(r.config.network.w_op));
      a.delay = r.config.train.delay;
      a.state_size = state_size_of(r.config);
      rows.push_back(a);
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& a = rows[i];
    a.runs = static_cast<int>(members[i].size());
    double early_sum = 0.0, final_sum = 0.0;
    double early_best = std::numeric_limits<double>::infinity();
    double final_best = std::numeric_limits<double>::infinity();
    for (const auto* r : members[i]) {
      if (!r->ok()) continue;
      ++a.completed;
      early_sum += r->early;
      final_sum += r->final;
      early_best = std::min(early_best, r->early);
      final_best = std::min(final_best, r->final);
    }
    if (a.completed == 0) {
      a.early_mean = a.early_best = a.final_mean = a.final_best = nan;
    } else {
      a.early_mean = early_sum / a.completed;
      a.final_mean = final_sum / a.completed;
      a.early_best = early_best;
      a.final_best = final_best;
    }
  }
  return rows;
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << kRunsHeader << '\n';
  for (const auto& r : runs) {
    const bool lstm = r.config.model == ModelKind::kLstm;
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    f << model_name(r.config.model) << '-' << cell_hash(r.config) << ','
      << model_name(r.config.model) << ','
      << (lstm ? "-" : rules::op_name(r.config.network.h_op)) << ','
      << (lstm ? "-" : rules::op_name(r.config.network.w_op)) << ',' << r.config.train.delay << ','
      << state_size_of(r.config) << ',' << r.config.train.seed << ',' << status << ','
      << fmt(r.early) << ',' << fmt(r.final) << ',' << r.dir.string() << '\n';
  }
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << kAggregateHeader << '\n';
  for (const auto& a : rows) {
    f << a.cell << ',' << a.model << ',' << a.h_op << ',' << a.w_op << ',' << a.delay << ','
      << a.state_size << ',' << a.runs << ',' << a.completed << ',' << fmt(a.early_mean) << ','
      << fmt(a.early_best) << ',' << fmt(a.final_mean) << ',' << fmt(a.final_best) << '\n';
  }
}

std::vector<RunRecord> scan_runs(const std::filesystem::path& out_dir) {
  std::vector<RunRecord> runs;
  const auto root = out_dir / "runs";
  if (!std::filesystem::exists(root)) return runs;
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "config.txt")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    RunRecord r;
    r.dir = d;
    r.config = parse_config(read_file(d / "config.txt"));
    r.status = std::filesystem::exists(d / "status") ? read_file(d / "status") : "incomplete";
    if (r.ok()) {
      fill_losses(r);
    } else {
      r.early = r.final = std::numeric_limits<double>::quiet_NaN();
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace plastic::harness
