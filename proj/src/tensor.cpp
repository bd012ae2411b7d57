#include "fedprune/tensor.hpp"

#include <cmath>
#include <sstream>

#include "fedprune/errors.hpp"

namespace fedprune {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " holds " +
                     std::to_string(shape_size(shape_)) + " elements, got " +
                     std::to_string(data_.size()));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_external(Shape shape, std::vector<T> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw InvalidArgument("non-finite value at flat index " +
                            std::to_string(i));
    }
  }
  return BasicTensor(std::move(shape), std::move(data));
}

template <typename T>
std::size_t BasicTensor<T>::row_size() const {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return data_.size() / shape_[0];
}

template <typename T>
std::span<T> BasicTensor<T>::row(std::size_t i) {
  const std::size_t n = row_size();
  return std::span<T>(data_).subspan(i * n, n);
}

template <typename T>
std::span<const T> BasicTensor<T>::row(std::size_t i) const {
  const std::size_t n = row_size();
  return std::span<const T>(data_).subspan(i * n, n);
}

template <typename T>
void BasicTensor<T>::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                     shape_string(shape));
  }
  shape_ = std::move(shape);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace fedprune
