#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace fastdips {

// Flat column of 64-bit reals plus a row-major shape. The math core works on
// Eigen vectors directly; Tensor exists so shaped data survives file I/O and
// the CLI boundary.
struct Tensor {
  std::vector<std::int64_t> shape;
  Eigen::VectorXd values;

  Tensor() = default;
  // Throws std::invalid_argument unless product(shape) == values.size() and
  // every entry is finite.
  Tensor(std::vector<std::int64_t> shape, Eigen::VectorXd values);

  std::int64_t size() const { return values.size(); }
};

Tensor make_vector_tensor(const Eigen::VectorXd& v);

// TEN1 container: magic "TEN1", uint32 LE ndim, ndim x uint64 LE dims,
// row-major float64 LE payload.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

// In-memory codec (used by the file functions and by round-trip tests).
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes);

}  // namespace fastdips
