#include "lwfa/nn/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "lwfa/error.hpp"

namespace lwfa::nn {

std::size_t shape_volume(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw DataError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw DataError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  if (!std::isfinite(fill)) throw DataError("tensor fill value is not finite");
  data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_volume(shape_) != data_.size()) {
    throw DataError("tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_to_string(shape_));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw DataError("tensor contains a non-finite value");
  }
}

float& Tensor::at(std::size_t c, std::size_t y, std::size_t x) {
  return data_[(c * shape_[1] + y) * shape_[2] + x];
}

float Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
  return data_[(c * shape_[1] + y) * shape_[2] + x];
}

}  // namespace lwfa::nn
