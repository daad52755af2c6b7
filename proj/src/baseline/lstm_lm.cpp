#include "plastic/baseline/lstm_lm.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "plastic/net/network.hpp"

namespace plastic::baseline {
namespace {

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

void BaselineConfig::validate() const {
  if (units < 1) throw std::invalid_argument("lstm_units: must be >= 1");
  if (alphabet < 2) throw std::invalid_argument("alphabet: needs at least 2 symbols");
}

std::size_t lstm_param_count(const BaselineConfig& cfg) {
  const auto u = static_cast<std::size_t>(cfg.units);
  const auto a = static_cast<std::size_t>(cfg.alphabet);
  return 4 * u * (u + a) + 4 * u + a * u + a;
}

bool operator==(const LstmLanguageModel::State& a, const LstmLanguageModel::State& b) {
  return a.prev == b.prev && bit_equal(a.h, b.h) && bit_equal(a.c, b.c);
}

LstmLanguageModel::LstmLanguageModel(BaselineConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int u = cfg_.units;
  const int a = cfg_.alphabet;
  wx_ = meta_.add("lstm.input_weight", glorot(a, 4 * u, rng));
  wh_ = meta_.add("lstm.recurrent_weight", glorot(u, 4 * u, rng));
  Matrix bias = Matrix::Zero(1, 4 * u);
  bias.middleCols(u, u).setConstant(1.0);  // forget gate
  b_ = meta_.add("lstm.bias", std::move(bias));
  wo_ = meta_.add("lstm.output_weight", glorot(u, a, rng));
  bo_ = meta_.add("lstm.output_bias", Matrix::Zero(1, a));
}

LstmLanguageModel::State LstmLanguageModel::initial_state() const {
  return State{Matrix::Zero(1, cfg_.units), Matrix::Zero(1, cfg_.units), -1};
}

LstmLanguageModel::TapeState LstmLanguageModel::load(ad::Tape& tape, const State& s) const {
  return TapeState{tape.constant(s.h), tape.constant(s.c), s.prev};
}

LstmLanguageModel::TapeState LstmLanguageModel::reset(ad::Tape& tape, const TapeState&) const {
  return TapeState{tape.constant(Matrix::Zero(1, cfg_.units)),
                   tape.constant(Matrix::Zero(1, cfg_.units)), -1};
}

Var LstmLanguageModel::record_step(ad::Tape& tape, TapeState& s, int target) const {
  return record_step(tape, s, target, nullptr);
}

Var LstmLanguageModel::record_step(ad::Tape& tape, TapeState& s, int target, Var* probs) const {
  if (target < 0 || target >= cfg_.alphabet) {
    throw std::out_of_range("lstm step: target " + std::to_string(target) + " outside alphabet");
  }
  const int u = cfg_.units;
  Matrix x = Matrix::Zero(1, cfg_.alphabet);
  if (s.prev >= 0) x(0, s.prev) = 1.0;
  const Var z = tape.add(tape.add(tape.matmul(tape.constant(std::move(x)), tape.parameter(meta_, wx_)),
                                  tape.matmul(s.h, tape.parameter(meta_, wh_))),
                         tape.parameter(meta_, b_));
  const Var in_gate = tape.sigmoid(tape.select_cols(z, 0, u));
  const Var forget = tape.sigmoid(tape.select_cols(z, u, u));
  const Var out_gate = tape.sigmoid(tape.select_cols(z, 2 * u, u));
  const Var cand = tape.tanh(tape.select_cols(z, 3 * u, u));
  s.c = tape.add(tape.multiply(forget, s.c), tape.multiply(in_gate, cand));
  s.h = tape.multiply(out_gate, tape.tanh(s.c));
  s.prev = target;

  const Var logits = tape.add(tape.matmul(s.h, tape.parameter(meta_, wo_)), tape.parameter(meta_, bo_));
  const Var p = tape.softmax(logits, ad::SoftmaxAxis::kAcrossCols);
  if (probs != nullptr) *probs = p;
  const Var picked = tape.select_cols(p, target, 1);
  return tape.scale(tape.log(picked), -1.0);
}

LstmLanguageModel::State LstmLanguageModel::read(const ad::Tape& tape, const TapeState& s) const {
  return State{tape.value(s.h), tape.value(s.c), s.prev};
}

void LstmLanguageModel::check_finite(const State& s, std::int64_t step) const {
  if (!s.h.allFinite() || !s.c.allFinite()) {
    throw net::NonFiniteError("non-finite lstm state at step " + std::to_string(step));
  }
}

LstmLanguageModel::StepResult LstmLanguageModel::step(const State& s, int target) const {
  ad::Tape tape;
  TapeState ts = load(tape, s);
  Var probs;
  const Var loss = record_step(tape, ts, target, &probs);
  StepResult r;
  r.state = read(tape, ts);
  r.p = tape.value(probs).row(0).transpose();
  r.loss = tape.scalar_value(loss);
  return r;
}

void LstmLanguageModel::store_state(net::KvFile& kv, const State& s) const {
  kv.set("state/h", s.h);
  kv.set("state/c", s.c);
  kv.set("state/prev", static_cast<std::int64_t>(s.prev));
}

LstmLanguageModel::State LstmLanguageModel::load_state(const net::KvFile& kv) const {
  return State{kv.matrix("state/h"), kv.matrix("state/c"), static_cast<int>(kv.integer("state/prev"))};
}

}  // namespace plastic::baseline
