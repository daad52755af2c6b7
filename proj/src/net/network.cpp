#include "plastic/net/network.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

namespace plastic::net {
namespace {

ad::IndexList make_index(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

void NetworkConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  for (std::size_t i = 0; i < hidden_layers.size(); ++i) {
    if (hidden_layers[i] < 1) fail("hidden_layers: layer " + std::to_string(i) + " has no neurons");
  }
  if (d_h < 2) fail("d_h: needs at least 2 components, got " + std::to_string(d_h));
  if (d_w < 1) fail("d_w: must be positive, got " + std::to_string(d_w));
  if (d_e < 1) fail("d_e: must be positive, got " + std::to_string(d_e));
  if (hidden_width < 1) fail("hidden_width: must be positive");
  if (alphabet < 2) fail("alphabet: needs at least 2 symbols");
  if (rules::is_lstm(h_op) && d_h % 2 != 0) {
    fail("d_h: " + std::string(rules::op_name(h_op)) + " needs an even state size, got " +
         std::to_string(d_h));
  }
  if (rules::is_lstm(w_op) && d_w % 2 != 0) {
    fail("d_w: " + std::string(rules::op_name(w_op)) + " needs an even state size, got " +
         std::to_string(d_w));
  }
}

bool operator==(const NetworkState& a, const NetworkState& b) {
  if (a.h.size() != b.h.size() || a.w.size() != b.w.size()) return false;
  for (std::size_t i = 0; i < a.h.size(); ++i) {
    if (!bit_equal(a.h[i], b.h[i])) return false;
  }
  for (std::size_t i = 0; i < a.w.size(); ++i) {
    if (!bit_equal(a.w[i], b.w[i])) return false;
  }
  return true;
}

std::size_t meta_param_count(const NetworkConfig& cfg) {
  const auto m = static_cast<std::size_t>(cfg.hidden_width);
  const auto readout_in = static_cast<std::size_t>(cfg.d_h + cfg.d_w + cfg.d_e);
  const auto d_h = static_cast<std::size_t>(cfg.d_h);
  return rules::kernel_param_count(cfg.w_op, cfg.d_w, cfg.synapse_input_dim(), cfg.hidden_width) +
         rules::kernel_param_count(cfg.h_op, cfg.d_h, cfg.d_w + cfg.d_e, cfg.hidden_width) +
         (readout_in * m + m + m * d_h + d_h) +
         static_cast<std::size_t>(cfg.layer_count() * cfg.d_e);
}

NetworkState reset_activations(NetworkState state) {
  for (auto& h : state.h) h.setZero();
  return state;
}

void check_finite(const NetworkState& state, const NetworkConfig& cfg, std::int64_t step) {
  const int layers = cfg.layer_count();
  for (int l = 0; l < layers; ++l) {
    if (!all_finite(state.h.at(l))) {
      throw NonFiniteError("non-finite activation in layer " + std::to_string(l) + " at step " +
                           std::to_string(step));
    }
  }
  for (int dst = 0; dst < layers; ++dst) {
    for (int src = 0; src < layers; ++src) {
      if (!all_finite(state.w.at(dst * layers + src))) {
        throw NonFiniteError("non-finite synapse state " + std::to_string(src) + "->" +
                             std::to_string(dst) + " at step " + std::to_string(step));
      }
    }
  }
}

Network::Network(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  w_kernel_ = rules::make_kernel(meta_, "w_kernel", cfg_.w_op, rules::KernelRole::kSynapse,
                                 cfg_.d_w, cfg_.synapse_input_dim(), cfg_.hidden_width, rng);
  h_kernel_ = rules::make_kernel(meta_, "h_kernel", cfg_.h_op, rules::KernelRole::kNeuron,
                                 cfg_.d_h, cfg_.d_w + cfg_.d_e, cfg_.hidden_width, rng);
  readout_hidden_ =
      rules::make_dense(meta_, "readout.hidden", cfg_.d_h + cfg_.d_w + cfg_.d_e, cfg_.hidden_width, rng);
  readout_out_ = rules::make_dense(meta_, "readout.out", cfg_.hidden_width, cfg_.d_h, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < cfg_.layer_count(); ++l) {
    Matrix e(1, cfg_.d_e);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
    embeddings_.push_back(meta_.add("embedding." + std::to_string(l), std::move(e)));
  }

  const int layers = cfg_.layer_count();
  blocks_.resize(static_cast<std::size_t>(layers * layers));
  for (int dst = 0; dst < layers; ++dst) {
    for (int src = 0; src < layers; ++src) {
      const int n_dst = cfg_.neurons(dst);
      const int n_src = cfg_.neurons(src);
      std::vector<int> post(static_cast<std::size_t>(n_dst * n_src));
      std::vector<int> pre(post.size());
      for (int a = 0; a < n_dst; ++a) {
        for (int b = 0; b < n_src; ++b) {
          post[a * n_src + b] = a;
          pre[a * n_src + b] = b;
        }
      }
      blocks_[block_index(dst, src)] = BlockIndex{make_index(std::move(post)), make_index(std::move(pre))};
    }
  }
}

NetworkState Network::init_state(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  NetworkState s;
  const int layers = cfg_.layer_count();
  for (int l = 0; l < layers; ++l) s.h.push_back(Matrix::Zero(cfg_.neurons(l), cfg_.d_h));
  for (int dst = 0; dst < layers; ++dst) {
    for (int src = 0; src < layers; ++src) {
      const int n_src = cfg_.neurons(src);
      std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(n_src)));
      Matrix w(cfg_.neurons(dst) * n_src, cfg_.d_w);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
      s.w.push_back(std::move(w));
    }
  }
  return s;
}

TapeState Network::load(ad::Tape& tape, const NetworkState& state) const {
  TapeState ts;
  for (const auto& h : state.h) ts.h.push_back(tape.constant(h));
  for (const auto& w : state.w) ts.w.push_back(tape.constant(w));
  return ts;
}

TapeState Network::reset(ad::Tape& tape, const TapeState& state) const {
  TapeState ts;
  for (int l = 0; l < cfg_.layer_count(); ++l) {
    ts.h.push_back(tape.constant(Matrix::Zero(cfg_.neurons(l), cfg_.d_h)));
  }
  ts.w = state.w;
  return ts;
}

NetworkState Network::read(const ad::Tape& tape, const TapeState& state) const {
  NetworkState s;
  for (Var v : state.h) s.h.push_back(tape.value(v));
  for (Var v : state.w) s.w.push_back(tape.value(v));
  return s;
}

StepRecord Network::record_step(ad::Tape& tape, TapeState& state, int target) const {
  if (target < 0 || target >= cfg_.alphabet) {
    throw std::out_of_range("step: target " + std::to_string(target) + " outside alphabet");
  }
  const int layers = cfg_.layer_count();
  StepRecord out;
  // The Hebbian product is d_h wide; the synapse state is d_w wide. Extra
  // components are dropped, missing ones are zero.
  auto fit_width = [](ad::Tape& t, Var v, int width) {
    const Matrix& m = t.value(v);
    if (m.cols() == width) return v;
    if (m.cols() > width) return t.select_cols(v, 0, width);
    return t.concat({v, t.constant(Matrix::Zero(m.rows(), width - m.cols()))});
  };

  for (int dst = 0; dst < layers; ++dst) {
    const Var h_post = state.h[dst];
    const Var e_post = tape.parameter(meta_, embeddings_[dst]);
    std::vector<Var> incoming;
    incoming.reserve(static_cast<std::size_t>(layers));
    for (int src = 0; src < layers; ++src) {
      const int b = block_index(dst, src);
      const Var w = state.w[b];
      const Var pre_rows = tape.gather_rows(state.h[src], blocks_[b].pre);
      const Var post_rows = tape.gather_rows(h_post, blocks_[b].post);
      const Var u = rules::synapse_effect(tape, w, tape.select_cols(pre_rows, 0, 1));
      const Var hebb = rules::hebbian_term(tape, post_rows, pre_rows);
      const Var x = rules::synapse_input_vector(tape, post_rows, pre_rows, u, hebb, e_post,
                                                tape.parameter(meta_, embeddings_[src]));
      state.w[b] = rules::synapse_update(tape, meta_, w_kernel_, w, x, fit_width(tape, hebb, cfg_.d_w));
      incoming.push_back(rules::integrate(tape, u, cfg_.neurons(src)));
    }
    const Var u_total = rules::integrate(tape, incoming, cfg_.neurons(dst), cfg_.d_w);

    if (dst != cfg_.input_layer()) {
      state.h[dst] = rules::neuron_update(tape, meta_, h_kernel_, h_post, u_total, e_post);
      continue;
    }

    // Input layer: readout, per-component softmax across the alphabet,
    // prediction from component 0, then teacher substitution.
    const Var hidden =
        tape.tanh(rules::dense(tape, meta_, readout_hidden_, tape.concat({h_post, u_total, e_post})));
    const Var v = rules::dense(tape, meta_, readout_out_, hidden);
    const Var probs = tape.softmax(v, ad::SoftmaxAxis::kAcrossRows);
    const Var p = tape.select_cols(probs, 0, 1);
    const Var picked = tape.gather_rows(p, make_index({target}));
    out.loss = tape.scale(tape.log(picked), -1.0);
    out.p = p;

    Matrix one_hot = Matrix::Zero(cfg_.alphabet, 1);
    one_hot(target, 0) = 1.0;
    const Var y = tape.constant(std::move(one_hot));
    const Var err = tape.subtract(y, p);
    if (cfg_.d_h > 2) {
      state.h[dst] = tape.concat({y, tape.select_cols(probs, 1, cfg_.d_h - 2), err});
    } else {
      state.h[dst] = tape.concat({y, err});
    }
  }
  return out;
}

std::pair<NetworkState, StepOutput> Network::step(const NetworkState& state, int target) const {
  ad::Tape tape;
  TapeState ts = load(tape, state);
  const StepRecord rec = record_step(tape, ts, target);
  StepOutput out;
  out.p = tape.value(rec.p).col(0);
  out.loss = tape.scalar_value(rec.loss);
  return {read(tape, ts), std::move(out)};
}

}  // namespace plastic::net
