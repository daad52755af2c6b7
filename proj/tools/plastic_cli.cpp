// Command-line front end: train / baseline / grid / gradcheck / aggregate /
// corpus-stats. Settings resolve as config file < PLASTIC_* env < flags.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "plastic/corpus/corpus.hpp"
#include "plastic/harness/config.hpp"
#include "plastic/harness/gradcheck.hpp"
#include "plastic/harness/grid.hpp"
#include "plastic/net/network.hpp"

using namespace plastic;

namespace {

struct Common {
  std::string config_file;
  std::string corpus, h_op, w_op, out_dir;
  std::optional<int> delay, state_size, lstm_units;
  std::optional<long long> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::vector<std::string> sets;  // raw key=value
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "key=value config file");
  app->add_option("--corpus", c.corpus, "plain text corpus");
  app->add_option("--h-op", c.h_op, "neuron update op");
  app->add_option("--w-op", c.w_op, "synapse update op");
  app->add_option("--delay", c.delay, "snippet delay D (P = T + D)");
  app->add_option("--state-size", c.state_size, "d_h = d_w");
  app->add_option("--steps", c.steps, "characters to stream");
  app->add_option("--seed", c.seed);
  app->add_option("--lr", c.lr, "learning rate");
  app->add_option("--out-dir", c.out_dir);
  app->add_option("--set", c.sets, "extra key=value override (repeatable)");
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

harness::ExperimentConfig resolve(const Common& c, harness::Overrides extra = {}) {
  harness::Overrides o = std::move(extra);
  auto put = [&](const char* key, const auto& v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    o.emplace_back(key, ss.str());
  };
  if (!c.corpus.empty()) put("corpus_path", c.corpus);
  if (!c.h_op.empty()) put("h_op", c.h_op);
  if (!c.w_op.empty()) put("w_op", c.w_op);
  if (c.delay) put("delay", *c.delay);
  if (c.state_size) put("state_size", *c.state_size);
  if (c.steps) put("steps", *c.steps);
  if (c.seed) put("seed", *c.seed);
  if (c.lr) put("lr", *c.lr);
  if (!c.out_dir.empty()) put("out_dir", c.out_dir);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    o.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const std::string text = c.config_file.empty() ? std::string() : slurp(c.config_file);
  return harness::parse_config(text, o, harness::environment_overrides());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int report(const harness::RunRecord& r) {
  std::cout << "run_dir " << r.dir.string() << "\nstatus  " << r.status << '\n';
  if (!r.ok()) return 1;
  std::cout << "early   " << num(r.early) << "\nfinal   " << num(r.final) << '\n';
  return 0;
}

template <typename T>
std::vector<T> parse_list(const std::vector<std::string>& items, T (*conv)(const std::string&)) {
  std::vector<T> out;
  for (const auto& s : items) out.push_back(conv(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned local plasticity rules trained to remember past snippets"};
  app.require_subcommand(1);

  Common train_opts;
  bool train_force = false;
  auto* train = app.add_subcommand("train", "train one plastic network");
  add_common(train, train_opts);
  train->add_flag("--force", train_force, "rerun even if the run directory is complete");

  Common base_opts;
  bool base_force = false;
  std::optional<int> base_units;
  auto* base = app.add_subcommand("baseline", "train one LSTM language model on the same objective");
  add_common(base, base_opts);
  base->add_option("--lstm-units", base_units);
  base->add_flag("--force", base_force);

  Common grid_opts;
  std::vector<std::string> g_h{"GATED"}, g_w{"GATED"};
  std::vector<int> g_delays, g_sizes, g_units;
  std::vector<std::uint64_t> g_seeds;
  harness::GridOptions g_run;
  auto* grid = app.add_subcommand("grid", "sweep h_op x w_op x delay x state size x seed");
  add_common(grid, grid_opts);
  grid->add_option("--h-ops", g_h)->delimiter(',');
  grid->add_option("--w-ops", g_w)->delimiter(',');
  grid->add_option("--delays", g_delays)->delimiter(',');
  grid->add_option("--state-sizes", g_sizes)->delimiter(',');
  grid->add_option("--seeds", g_seeds)->delimiter(',');
  grid->add_option("--lstm-units", g_units, "add LSTM baseline cells")->delimiter(',');
  grid->add_option("--jobs", g_run.jobs, "parallel runs");
  grid->add_flag("--force", g_run.force);

  Common gc_opts;
  double gc_eps = 1e-5;
  long long gc_t = 0;
  bool gc_lstm = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check through one 2T segment");
  add_common(gc, gc_opts);
  gc->add_option("--eps", gc_eps);
  gc->add_option("--t", gc_t, "segment end (default 3T)");
  gc->add_flag("--lstm", gc_lstm, "check the LSTM baseline instead");

  std::string agg_dir = "runs";
  auto* agg = app.add_subcommand("aggregate", "rebuild runs.csv and aggregate.csv from run directories");
  agg->add_option("--out-dir", agg_dir);

  std::string cs_corpus;
  auto* cs = app.add_subcommand("corpus-stats", "length and symbol histogram of a corpus");
  cs->add_option("--corpus", cs_corpus);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto cfg = resolve(train_opts, {{"model", "plastic"}});
      std::cout << "np      " << net::meta_param_count(cfg.network) << '\n';
      return report(harness::run_cell(cfg, train_force));
    }
    if (*base) {
      harness::Overrides extra{{"model", "lstm"}};
      if (base_units) extra.emplace_back("lstm_units", std::to_string(*base_units));
      auto cfg = resolve(base_opts, extra);
      std::cout << "np      " << baseline::lstm_param_count(cfg.lstm) << '\n';
      return report(harness::run_cell(cfg, base_force));
    }
    if (*grid) {
      const auto cfg = resolve(grid_opts);
      harness::Grid g;
      g.h_ops = parse_list<rules::OpKind>(g_h, [](const std::string& s) { return rules::parse_op(s); });
      g.w_ops = parse_list<rules::OpKind>(g_w, [](const std::string& s) { return rules::parse_op(s); });
      g.delays = g_delays;
      g.state_sizes = g_sizes;
      g.seeds = g_seeds;
      g.lstm_units = g_units;
      const auto result = harness::run_grid(g, cfg, g_run);
      int failed = 0;
      for (const auto& r : result.runs) failed += r.ok() ? 0 : 1;
      std::cout << result.runs.size() << " runs (" << failed << " failed), " << result.aggregate.size()
                << " cells -> " << cfg.out_dir << "/aggregate.csv\n";
      return failed == 0 ? 0 : 1;
    }
    if (*gc) {
      auto cfg = resolve(gc_opts, {{"model", gc_lstm ? "lstm" : "plastic"}});
      const std::int64_t t = gc_t > 0 ? gc_t : 3 * cfg.train.segment_length;
      const auto stream = corpus::load_corpus_file(cfg.corpus_path);
      const auto c = harness::check_segment_gradients(cfg, stream, t, gc_eps);
      std::printf("params %zu  t=%lld  t_p=%lld  L_p=%.6f\nmax rel error %.3e at %zu (ad %.9g, fd %.9g)\n",
                  c.params, static_cast<long long>(c.t), static_cast<long long>(c.t_p), c.loss_past,
                  c.result.max_rel_error, c.result.worst_index, c.result.worst_analytic,
                  c.result.worst_numeric);
      return c.result.max_rel_error < 1e-4 ? 0 : 1;
    }
    if (*agg) {
      const auto runs = harness::scan_runs(agg_dir);
      const auto rows = harness::aggregate(runs);
      harness::write_runs_csv(std::filesystem::path(agg_dir) / "runs.csv", runs);
      harness::write_aggregate_csv(std::filesystem::path(agg_dir) / "aggregate.csv", rows);
      std::cout << runs.size() << " runs, " << rows.size() << " cells\n";
      return 0;
    }
    if (*cs) {
      if (cs_corpus.empty()) cs_corpus = harness::ExperimentConfig().corpus_path;
      const auto stream = corpus::load_corpus_file(cs_corpus);
      const auto hist = corpus::histogram(stream);
      std::cout << "path    " << cs_corpus << "\nlength  " << stream.size() << '\n';
      for (std::size_t s = 0; s < hist.size(); ++s) {
        const char c = s == 26 ? '_' : corpus::char_of(static_cast<int>(s));
        std::printf("%c %8lld  %.4f\n", c, static_cast<long long>(hist[s]),
                    static_cast<double>(hist[s]) / static_cast<double>(stream.size()));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
