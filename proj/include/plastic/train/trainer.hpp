#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plastic/ad/tape.hpp"
#include "plastic/corpus/corpus.hpp"
#include "plastic/net/checkpoint.hpp"
#include "plastic/train/metrics.hpp"
#include "plastic/train/optimizer.hpp"
#include "plastic/train/sampling.hpp"

namespace plastic::train {

// A model trained on the remember objective. `State` is the runtime state
// carried along the stream; `TapeState` is its on-tape counterpart.
template <typename M>
concept RememberModel = requires(M& m, const M& cm, ad::Tape& tape, const typename M::State& s,
                                 typename M::TapeState& ts, int target, net::KvFile& kv,
                                 const net::KvFile& ckv, std::int64_t step) {
  { m.meta() } -> std::same_as<ad::MetaParams&>;
  { cm.name() } -> std::convertible_to<std::string>;
  { cm.load(tape, s) } -> std::same_as<typename M::TapeState>;
  { cm.reset(tape, ts) } -> std::same_as<typename M::TapeState>;
  { cm.record_step(tape, ts, target) } -> std::same_as<ad::Var>;
  { cm.read(tape, ts) } -> std::same_as<typename M::State>;
  cm.check_finite(s, step);
  cm.store_state(kv, s);
  { cm.load_state(ckv) } -> std::same_as<typename M::State>;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SegmentMetrics {
  double loss_past = 0.0;
  double loss_online = 0.0;
  std::int64_t snippet_start = 0;
};

// Snippet sampling draws from its own generator so that different models
// trained with the same seed see the same snippet positions.
inline std::mt19937_64 make_sampler(std::uint64_t seed) {
  return std::mt19937_64(seed ^ 0x736e6970706574ULL);
}

namespace detail {

inline bool crosses_multiple(std::int64_t from, std::int64_t to, std::int64_t every) {
  return every > 0 && from / every != to / every;
}

}  // namespace detail

template <RememberModel M>
struct SegmentGraph {
  ad::Var loss_past;    // mean over the T replay steps
  ad::Var loss_online;  // mean over the T online steps
  typename M::TapeState online;
};

// Records steps 1, 2, 4 and 5 of a segment ending at stream position t
// (exclusive) with the snippet starting at t_p:
//   1. the incoming state enters the tape as constants,
//   2. T online steps on positions t-T .. t-1,
//   4. activations are reset while the synapse nodes stay shared,
//   5. T replay steps on positions t_p .. t_p+T-1.
template <RememberModel M>
SegmentGraph<M> record_segment(const M& model, const typename M::State& state,
                               const corpus::SymbolStream& stream, std::int64_t t,
                               std::int64_t t_p, const TrainConfig& cfg, ad::Tape& tape) {
  const int T = cfg.segment_length;
  if (t < T || t % T != 0) {
    throw std::invalid_argument("train_segment: t=" + std::to_string(t) +
                                " must be a positive multiple of T");
  }
  SegmentGraph<M> g{ad::Var{}, ad::Var{}, model.load(tape, state)};
  std::vector<ad::Var> online_losses;
  for (int k = 0; k < T; ++k) {
    const std::int64_t pos = t - T + k;
    online_losses.push_back(model.record_step(tape, g.online, stream.at(pos)));
    if (detail::crosses_multiple(pos, pos + 1, cfg.finite_check_every)) {
      model.check_finite(model.read(tape, g.online), pos + 1);
    }
  }
  typename M::TapeState past = model.reset(tape, g.online);
  std::vector<ad::Var> past_losses;
  for (int k = 0; k < T; ++k) past_losses.push_back(model.record_step(tape, past, stream.at(t_p + k)));

  g.loss_past = tape.scale(tape.sum(tape.concat(past_losses)), 1.0 / T);
  g.loss_online = tape.scale(tape.sum(tape.concat(online_losses)), 1.0 / T);
  return g;
}

// One full segment: record_segment with a freshly drawn t_p (step 3), then
//   6. backward through all 2T steps, 7. optimizer step,
//   8. `state` becomes the online state at t.
template <RememberModel M>
SegmentMetrics train_segment(M& model, typename M::State& state, OptimizerState& opt,
                             const corpus::SymbolStream& stream, std::int64_t t,
                             const TrainConfig& cfg, std::mt19937_64& sampler,
                             ad::Tape& tape) {
  if (t < cfg.segment_length || t % cfg.segment_length != 0) {
    throw std::invalid_argument("train_segment: t=" + std::to_string(t) +
                                " must be a positive multiple of T");
  }
  tape.clear();
  const SnippetSample snippet = sample_past(t, cfg, sampler);
  const SegmentGraph<M> g = record_segment(model, state, stream, t, snippet.start, cfg, tape);

  SegmentMetrics metrics;
  metrics.loss_past = tape.scalar_value(g.loss_past);
  metrics.loss_online = tape.scalar_value(g.loss_online);
  metrics.snippet_start = snippet.start;
  if (!std::isfinite(metrics.loss_past) || !std::isfinite(metrics.loss_online)) {
    throw NonFiniteLoss("non-finite loss in segment ending at step " + std::to_string(t));
  }

  const ad::Var objective = cfg.include_online_loss ? tape.add(g.loss_past, g.loss_online) : g.loss_past;
  const ad::Gradients grads = tape.backward(objective);
  optimizer_step(model.meta(), grads, opt, cfg.lr, cfg.adam);

  state = model.read(tape, g.online);
  return metrics;
}

template <RememberModel M>
net::KvFile make_checkpoint(M& model, const typename M::State& state, const OptimizerState& opt,
                            const std::mt19937_64& sampler, std::int64_t step,
                            const std::string& config_text) {
  net::KvFile kv;
  kv.set("config", config_text);
  kv.set("model", std::string(model.name()));
  kv.set("step", step);
  std::ostringstream rng;
  rng << sampler;
  kv.set("rng/sampler", rng.str());
  net::store_params(kv, "meta/", model.meta());
  for (std::size_t s = 0; s < opt.m.size(); ++s) {
    kv.set("opt/m/" + model.meta().name(s), opt.m[s]);
    kv.set("opt/v/" + model.meta().name(s), opt.v[s]);
  }
  kv.set("opt/step", opt.step);
  model.store_state(kv, state);
  return kv;
}

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // metrics.csv + checkpoint.bin
  std::string config_text;
};

// Streams the corpus segment by segment until cfg.steps characters have been
// read. Returns one row per logged segment.
template <RememberModel M>
std::vector<MetricRow> run_training(M& model, typename M::State state, const corpus::SymbolStream& stream,
                                    const TrainConfig& cfg, const RunOptions& options = {}) {
  cfg.validate();
  OptimizerState opt = OptimizerState::zeros_like(model.meta());
  std::mt19937_64 sampler = make_sampler(cfg.seed);
  ad::Tape tape;

  std::optional<MetricsWriter> writer;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    writer.emplace(*options.out_dir / "metrics.csv");
  }
  auto save = [&](const std::string& file, std::int64_t step) {
    if (!options.out_dir) return;
    make_checkpoint(model, state, opt, sampler, step, options.config_text)
        .write(*options.out_dir / file);
  };

  const auto start = std::chrono::steady_clock::now();
  std::vector<MetricRow> rows;
  const int T = cfg.segment_length;
  std::int64_t segment = 0;
  for (std::int64_t t = T; t <= cfg.steps; t += T, ++segment) {
    SegmentMetrics m;
    try {
      m = train_segment(model, state, opt, stream, t, cfg, sampler, tape);
    } catch (const std::exception&) {
      save("abort_checkpoint.bin", t - T);
      throw;
    }
    if (segment % cfg.log_every == 0) {
      MetricRow row;
      row.step = t;
      row.loss_past = m.loss_past;
      row.loss_online = m.loss_online;
      row.delay = cfg.delay;
      row.seed = cfg.seed;
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      row.model = model.name();
      if (writer) writer->append(row);
      rows.push_back(std::move(row));
    }
    if (detail::crosses_multiple(t - T, t, cfg.checkpoint_every)) save("checkpoint.bin", t);
  }
  save("checkpoint.bin", (cfg.steps / T) * T);
  return rows;
}

}  // namespace plastic::train
