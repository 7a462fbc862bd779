#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dg {

/// Dense n-dimensional array of 32-bit reals, row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<float> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, float value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  const std::vector<float>& values() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// Throws std::runtime_error naming `what` if any element is NaN/Inf.
  void ensure_finite(const char* what) const;

  /// Copy of the data widened to double.
  std::vector<double> as_doubles() const;
  static Tensor from_doubles(std::vector<std::size_t> shape, const std::vector<double>& v);

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

// DTNS container: magic "DTNS", version 0x01, dtype 0x01 (f32),
// u32 LE rank, rank x u64 LE extents, row-major f32 LE payload.
void write_dtns(std::ostream& os, const Tensor& t);
Tensor read_dtns(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

/// Stacks equally shaped tensors into one of shape [n, shape...].
Tensor stack(const std::vector<Tensor>& parts);
/// Row i of a stacked tensor as a tensor of the remaining extents.
Tensor unstack_row(const Tensor& stacked, std::size_t i);

}  // namespace dg
