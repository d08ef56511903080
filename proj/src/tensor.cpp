#include "fastdips/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fastdips {

namespace {

void append_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  append_u64le(out, bits);
}

std::uint32_t read_u32le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double read_f64le(const unsigned char* p) {
  std::uint64_t bits = read_u64le(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape_in, Eigen::VectorXd values_in)
    : shape(std::move(shape_in)), values(std::move(values_in)) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension");
    n *= d;
  }
  if (shape.empty()) n = values.size() == 0 ? 1 : -1;  // scalar shape not supported
  if (n != values.size())
    throw std::invalid_argument("tensor: shape product does not match data length");
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("tensor: non-finite entry");
}

Tensor make_vector_tensor(const Eigen::VectorXd& v) {
  return Tensor({static_cast<std::int64_t>(v.size())}, v);
}

std::string encode_tensor(const Tensor& t) {
  std::string out;
  out.reserve(8 + 8 * t.shape.size() + 8 * static_cast<std::size_t>(t.size()));
  out += "TEN1";
  append_u32le(out, static_cast<std::uint32_t>(t.shape.size()));
  for (std::int64_t d : t.shape) append_u64le(out, static_cast<std::uint64_t>(d));
  for (Eigen::Index i = 0; i < t.values.size(); ++i) append_f64le(out, t.values[i]);
  return out;
}

Tensor decode_tensor(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t len = bytes.size();
  if (len < 8 || bytes.compare(0, 4, "TEN1") != 0)
    throw std::runtime_error("ten1: malformed header (bad magic)");
  const std::uint32_t ndim = read_u32le(p + 4);
  if (ndim == 0 || ndim > 64) throw std::runtime_error("ten1: malformed header (ndim)");
  if (len < 8 + 8ull * ndim) throw std::runtime_error("ten1: truncated dimension block");
  std::vector<std::int64_t> shape(ndim);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint64_t d = read_u64le(p + 8 + 8ull * i);
    if (d == 0 || d > (1ull << 32)) throw std::runtime_error("ten1: bad dimension");
    shape[i] = static_cast<std::int64_t>(d);
    count *= d;
    if (count > (1ull << 32)) throw std::runtime_error("ten1: tensor too large");
  }
  const std::size_t payload_off = 8 + 8ull * ndim;
  if (len != payload_off + 8 * count)
    throw std::runtime_error("ten1: payload length does not match dimensions");
  Eigen::VectorXd values(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    values[static_cast<Eigen::Index>(i)] = read_f64le(p + payload_off + 8 * i);
    if (!std::isfinite(values[static_cast<Eigen::Index>(i)]))
      throw std::runtime_error("ten1: non-finite value in payload");
  }
  return Tensor(std::move(shape), std::move(values));
}

void write_tensor(const std::string& path, const Tensor& t) {
  // Re-validate through the constructor so non-finite data never hits disk.
  Tensor checked(t.shape, t.values);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("ten1: cannot open for write: " + path);
  const std::string bytes = encode_tensor(checked);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("ten1: short write: " + path);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("ten1: cannot open for read: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace fastdips
