#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace plastic::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamId {
  int index = -1;
  friend bool operator==(ParamId, ParamId) = default;
};

// Named collection of trainable matrices. Slot order is registration order
// and defines the flat parameter index used by optimizers and gradient checks.
class MetaParams {
 public:
  ParamId add(std::string name, Matrix init);

  std::size_t slots() const { return values_.size(); }
  // Total number of scalars across all slots.
  std::size_t count() const;

  const Matrix& value(ParamId id) const { return values_.at(id.index); }
  Matrix& value(ParamId id) { return values_.at(id.index); }
  const Matrix& value(std::size_t slot) const { return values_.at(slot); }
  Matrix& value(std::size_t slot) { return values_.at(slot); }
  const std::string& name(std::size_t slot) const { return names_.at(slot); }

  // Slot lookup by name; throws std::out_of_range when absent.
  ParamId find(const std::string& name) const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  double get(std::size_t flat_index) const;
  void set(std::size_t flat_index, double v);

  // Bitwise equality of names, shapes and values.
  friend bool operator==(const MetaParams& a, const MetaParams& b);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

// One matrix per MetaParams slot.
using Gradients = std::vector<Matrix>;

std::vector<double> flatten(const Gradients& grads);

}  // namespace plastic::ad
