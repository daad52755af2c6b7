#include "plastic/harness/gradcheck.hpp"

#include "plastic/baseline/lstm_lm.hpp"
#include "plastic/train/plastic_model.hpp"
#include "plastic/train/trainer.hpp"

namespace plastic::harness {
namespace {

template <typename M>
typename M::State advance(const M& model, typename M::State state, const corpus::SymbolStream& stream,
                          std::int64_t steps) {
  ad::Tape tape;
  for (std::int64_t pos = 0; pos < steps; ++pos) {
    tape.clear();
    auto ts = model.load(tape, state);
    model.record_step(tape, ts, stream.at(pos));
    state = model.read(tape, ts);
  }
  return state;
}

template <typename M>
SegmentCheck check(M& model, typename M::State state, const ExperimentConfig& cfg,
                   const corpus::SymbolStream& stream, std::int64_t t, double eps,
                   const std::optional<std::vector<std::size_t>>& indices) {
  const auto& tc = cfg.train;
  state = advance(model, std::move(state), stream, t - tc.segment_length);
  auto sampler = train::make_sampler(tc.seed);
  SegmentCheck out;
  out.t = t;
  out.t_p = train::sample_past(t, tc, sampler).start;
  out.params = model.meta().count();
  const ad::TapeFunction f = [&](ad::Tape& tape, const ad::MetaParams&) {
    return train::record_segment(model, state, stream, t, out.t_p, tc, tape).loss_past;
  };
  {
    ad::Tape tape;
    out.loss_past = tape.scalar_value(f(tape, model.meta()));
  }
  out.result = ad::grad_check(f, model.meta(), eps, indices);
  return out;
}

}  // namespace

SegmentCheck check_segment_gradients(const ExperimentConfig& cfg, const corpus::SymbolStream& stream,
                                     std::int64_t t, double eps,
                                     const std::optional<std::vector<std::size_t>>& indices) {
  cfg.validate();
  const std::uint64_t seed = cfg.train.seed;
  if (cfg.model == ModelKind::kLstm) {
    baseline::LstmLanguageModel model(cfg.lstm, seed);
    return check(model, model.initial_state(), cfg, stream, t, eps, indices);
  }
  train::PlasticModel model(net::Network(cfg.network, seed));
  auto state = model.network().init_state(seed ^ kStateSeedSalt);
  return check(model, std::move(state), cfg, stream, t, eps, indices);
}

}  // namespace plastic::harness
