#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "plastic/harness/config.hpp"
#include "plastic/harness/grid.hpp"

using namespace plastic;
using namespace plastic::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("plastic_harness_" + name);
  std::filesystem::remove_all(p);
  return p;
}

ExperimentConfig tiny_base(const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.corpus_path = PLASTIC_DATA_DIR "/fallback_snippet.txt";
  cfg.network.hidden_layers = {2};
  cfg.network.d_e = 2;
  cfg.network.hidden_width = 4;
  cfg.train.steps = 200;
  cfg.train.early_window = 50;
  cfg.train.final_window = 50;
  cfg.out_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("empty config echoes every default") {
  const ExperimentConfig cfg = parse_config("");
  const std::string text = render_config(cfg);
  CHECK(text == render_config(ExperimentConfig{}));
  CHECK(cfg.train.segment_length == 10);
  CHECK(cfg.network.d_h == 6);
  CHECK(cfg.network.d_w == 6);
  for (const char* key : {"model=plastic", "h_op=GATED", "w_op=GATED", "segment_length=10", "delay=10",
                          "steps=150000", "seed=1", "lr=0.001", "early_window=30000", "final_window=10000"}) {
    CAPTURE(key);
    CHECK(text.find(std::string(key) + "\n") != std::string::npos);
  }
  // The rendering parses back to the same configuration.
  CHECK(render_config(parse_config(text)) == text);
}

TEST_CASE("settings and overrides") {
  CHECK(parse_config("delay=80").train.horizon() == 90);
  const auto cfg = parse_config("# comment\n  state_size = 14  \nh_op = lstm-id # trailing\nhidden_layers=8,8\n");
  CHECK(cfg.network.d_h == 14);
  CHECK(cfg.network.d_w == 14);
  CHECK(cfg.network.h_op == rules::OpKind::kLstmId);
  CHECK(cfg.network.hidden_layers == std::vector<int>{8, 8});

  const auto layered = parse_config("delay=20", {{"delay", "40"}}, {{"delay", "30"}, {"seed", "5"}});
  CHECK(layered.train.delay == 40);
  CHECK(layered.train.seed == 5);
}

TEST_CASE("errors name the key") {
  CHECK_THROWS_WITH_AS(parse_config("dealy=80"), doctest::Contains("dealy"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("delay=eighty"), doctest::Contains("'delay'"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("lr=fast"), doctest::Contains("'lr'"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("h_op=rnn"), doctest::Contains("'h_op'"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("state_size=1"), doctest::Contains("d_h"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("w_op=LSTM\nd_w=5"), doctest::Contains("d_w"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("delay=-3"), doctest::Contains("delay"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("just words"), doctest::Contains("line 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("include_online_loss=maybe"), doctest::Contains("include_online_loss"),
                       std::invalid_argument);
}

TEST_CASE("environment overrides use the prefix") {
  ::setenv("PLASTIC_DELAY", "33", 1);
  ::setenv("PLASTIC_H_OP", "MLP", 1);
  const auto env = environment_overrides();
  ::unsetenv("PLASTIC_DELAY");
  ::unsetenv("PLASTIC_H_OP");
  const auto cfg = parse_config("delay=10", {}, env);
  CHECK(cfg.train.delay == 33);
  CHECK(cfg.network.h_op == rules::OpKind::kMlp);
}

TEST_CASE("cell hash ignores seed and output directory only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.train.seed = 99;
  b.out_dir = "elsewhere";
  CHECK(cell_hash(a) == cell_hash(b));
  b.train.delay = 40;
  CHECK(cell_hash(a) != cell_hash(b));
  CHECK(cell_hash(a).size() == 16);
  CHECK(run_directory(a) != run_directory([&] { auto c = a; c.train.seed = 2; return c; }()));
}

TEST_CASE("grid expansion, runs and aggregation") {
  const auto out = scratch("grid");
  const ExperimentConfig base = tiny_base(out);
  Grid g;
  g.h_ops = {rules::OpKind::kGated, rules::OpKind::kMlp};
  g.w_ops = {rules::OpKind::kGated, rules::OpKind::kMlpTanh};
  g.state_sizes = {2};
  g.seeds = {1, 2};
  CHECK(expand(g, base).size() == 8);

  const GridResult first = run_grid(g, base);
  CHECK(first.runs.size() == 8);
  CHECK(first.aggregate.size() == 4);
  for (const auto& r : first.runs) CHECK(r.ok());
  for (const auto& a : first.aggregate) {
    CHECK(a.runs == 2);
    CHECK(a.completed == 2);
    CHECK(a.early_best <= a.early_mean);
    CHECK(a.final_best <= a.final_mean);
  }

  // Early metric equals a hand recomputation over the run's CSV.
  const auto& r0 = first.runs[0];
  std::ifstream csv(r0.dir / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "step,loss_past,loss_online,delay,seed,wall_ms,model");
  double sum = 0.0;
  int n = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string step, loss;
    std::getline(ss, step, ',');
    std::getline(ss, loss, ',');
    if (std::stoll(step) > base.train.early_window) break;
    sum += std::stod(loss);
    ++n;
  }
  CHECK(n == 5);
  CHECK(r0.early == doctest::Approx(sum / n).epsilon(1e-15));

  const std::string agg1 = slurp(out / "aggregate.csv");
  const std::string runs1 = slurp(out / "runs.csv");
  CHECK(agg1.rfind(kAggregateHeader, 0) == 0);
  CHECK(std::count(agg1.begin(), agg1.end(), '\n') == 5);
  CHECK(std::count(runs1.begin(), runs1.end(), '\n') == 9);

  // Completed cells are reused: metrics files are left untouched.
  const auto stamp = std::filesystem::last_write_time(r0.dir / "metrics.csv");
  const GridResult second = run_grid(g, base);
  CHECK(std::filesystem::last_write_time(r0.dir / "metrics.csv") == stamp);
  CHECK(slurp(out / "aggregate.csv") == agg1);

  // Forced reruns reproduce the same numbers.
  const GridResult forced = run_grid(g, base, GridOptions{2, true});
  CHECK(slurp(out / "aggregate.csv") == agg1);

  // Rebuilding from disk gives the same table.
  const auto scanned = scan_runs(out);
  CHECK(scanned.size() == 8);
  CHECK(aggregate(scanned).size() == 4);
  std::filesystem::remove_all(out);
}

TEST_CASE("a failed run is recorded and the grid continues") {
  const auto out = scratch("fail");
  ExperimentConfig base = tiny_base(out);
  Grid g;
  g.h_ops = {rules::OpKind::kGated};
  g.w_ops = {rules::OpKind::kGated};
  g.state_sizes = {2};
  g.seeds = {1};
  g.lstm_units = {4};
  base.corpus_path = (out / "missing.txt").string();
  const GridResult res = run_grid(g, base);
  REQUIRE(res.runs.size() == 2);
  for (const auto& r : res.runs) {
    CHECK_FALSE(r.ok());
    CHECK(r.status.rfind("failed: ", 0) == 0);
  }
  CHECK(res.aggregate.size() == 2);
  CHECK(res.aggregate[0].completed == 0);
  CHECK(res.aggregate[1].model == "lstm");
  CHECK(res.aggregate[1].h_op == "-");
  CHECK(std::filesystem::exists(out / "runs.csv"));
  std::filesystem::remove_all(out);
}
