#pragma once

#include <cstdint>
#include <string>

#include "plastic/ad/tape.hpp"
#include "plastic/net/checkpoint.hpp"

namespace plastic::baseline {

using ad::Matrix;
using ad::Var;

struct BaselineConfig {
  int units = 128;
  int alphabet = 27;
  void validate() const;
};

// 4u(u + A) + 4u + A*u + A for A = alphabet.
std::size_t lstm_param_count(const BaselineConfig& cfg);

// Character LSTM whose weights are the trained parameters. The previous
// target is fed back as a one-hot input; -1 means no input (zero vector),
// which is what a reset state carries.
class LstmLanguageModel {
 public:
  struct State {
    Matrix h;
    Matrix c;
    int prev = -1;
    friend bool operator==(const State& a, const State& b);
  };
  struct TapeState {
    Var h;
    Var c;
    int prev = -1;
  };
  struct StepResult {
    State state;
    Eigen::VectorXd p;
    double loss = 0.0;
  };

  LstmLanguageModel(BaselineConfig cfg, std::uint64_t seed);

  std::string name() const { return "lstm"; }
  const BaselineConfig& config() const { return cfg_; }
  ad::MetaParams& meta() { return meta_; }
  const ad::MetaParams& meta() const { return meta_; }

  State initial_state() const;

  TapeState load(ad::Tape& tape, const State& s) const;
  TapeState reset(ad::Tape& tape, const TapeState& s) const;
  // Records one step and returns -log p[target].
  Var record_step(ad::Tape& tape, TapeState& s, int target) const;
  // Same, also exposing the probability row (1 x alphabet).
  Var record_step(ad::Tape& tape, TapeState& s, int target, Var* probs) const;
  State read(const ad::Tape& tape, const TapeState& s) const;
  void check_finite(const State& s, std::int64_t step) const;

  StepResult step(const State& s, int target) const;

  void store_state(net::KvFile& kv, const State& s) const;
  State load_state(const net::KvFile& kv) const;

  ad::ParamId input_weights() const { return wx_; }
  ad::ParamId recurrent_weights() const { return wh_; }
  ad::ParamId gate_bias() const { return b_; }
  ad::ParamId output_weights() const { return wo_; }
  ad::ParamId output_bias() const { return bo_; }

 private:
  BaselineConfig cfg_;
  ad::MetaParams meta_;
  ad::ParamId wx_, wh_, b_, wo_, bo_;
};

}  // namespace plastic::baseline
