#include "plastic/ad/meta_params.hpp"

#include <cstring>
#include <stdexcept>

namespace plastic::ad {

ParamId MetaParams::add(std::string name, Matrix init) {
  for (const auto& n : names_) {
    if (n == name) throw std::invalid_argument("MetaParams: duplicate slot '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return ParamId{static_cast<int>(values_.size()) - 1};
}

std::size_t MetaParams::count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

ParamId MetaParams::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return ParamId{static_cast<int>(i)};
  }
  throw std::out_of_range("MetaParams: no slot named '" + name + "'");
}

std::vector<double> MetaParams::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& v : values_) out.insert(out.end(), v.data(), v.data() + v.size());
  return out;
}

void MetaParams::assign(std::span<const double> flat) {
  if (flat.size() != count()) throw std::invalid_argument("MetaParams::assign: size mismatch");
  std::size_t off = 0;
  for (auto& v : values_) {
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.data());
    off += static_cast<std::size_t>(v.size());
  }
}

double MetaParams::get(std::size_t flat_index) const {
  for (const auto& v : values_) {
    if (flat_index < static_cast<std::size_t>(v.size())) return v.data()[flat_index];
    flat_index -= v.size();
  }
  throw std::out_of_range("MetaParams::get: index out of range");
}

void MetaParams::set(std::size_t flat_index, double x) {
  for (auto& v : values_) {
    if (flat_index < static_cast<std::size_t>(v.size())) {
      v.data()[flat_index] = x;
      return;
    }
    flat_index -= v.size();
  }
  throw std::out_of_range("MetaParams::set: index out of range");
}

bool operator==(const MetaParams& a, const MetaParams& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    const auto& x = a.values_[i];
    const auto& y = b.values_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) != 0) return false;
  }
  return true;
}

std::vector<double> flatten(const Gradients& grads) {
  std::vector<double> out;
  for (const auto& g : grads) out.insert(out.end(), g.data(), g.data() + g.size());
  return out;
}

}  // namespace plastic::ad
