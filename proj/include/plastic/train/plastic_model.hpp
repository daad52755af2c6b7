#pragma once

#include <string>

#include "plastic/net/checkpoint.hpp"
#include "plastic/net/network.hpp"

namespace plastic::train {

// Adapts net::Network to the RememberModel interface.
class PlasticModel {
 public:
  using State = net::NetworkState;
  using TapeState = net::TapeState;

  explicit PlasticModel(net::Network network) : net_(std::move(network)) {}

  std::string name() const { return "plastic"; }
  ad::MetaParams& meta() { return net_.meta(); }
  const net::Network& network() const { return net_; }

  TapeState load(ad::Tape& tape, const State& s) const { return net_.load(tape, s); }
  TapeState reset(ad::Tape& tape, const TapeState& s) const { return net_.reset(tape, s); }
  ad::Var record_step(ad::Tape& tape, TapeState& s, int target) const {
    return net_.record_step(tape, s, target).loss;
  }
  State read(const ad::Tape& tape, const TapeState& s) const { return net_.read(tape, s); }
  void check_finite(const State& s, std::int64_t step) const {
    net::check_finite(s, net_.config(), step);
  }

  void store_state(net::KvFile& kv, const State& s) const {
    for (std::size_t l = 0; l < s.h.size(); ++l) kv.set("state/h/" + std::to_string(l), s.h[l]);
    const int layers = net_.config().layer_count();
    for (int dst = 0; dst < layers; ++dst) {
      for (int src = 0; src < layers; ++src) {
        kv.set("state/w/" + std::to_string(dst) + "/" + std::to_string(src),
               s.w[net_.block_index(dst, src)]);
      }
    }
  }

  State load_state(const net::KvFile& kv) const {
    State s;
    const int layers = net_.config().layer_count();
    for (int l = 0; l < layers; ++l) s.h.push_back(kv.matrix("state/h/" + std::to_string(l)));
    for (int dst = 0; dst < layers; ++dst) {
      for (int src = 0; src < layers; ++src) {
        s.w.push_back(kv.matrix("state/w/" + std::to_string(dst) + "/" + std::to_string(src)));
      }
    }
    return s;
  }

 private:
  net::Network net_;
};

}  // namespace plastic::train
