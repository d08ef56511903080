#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fastdips {

// Forward model A with reverse-mode (vjp) and forward-mode (jvp) derivative
// hooks. jvp falls back to a forward-difference probe when no exact
// forward-mode rule exists (has_exact_jvp() == false).
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual const char* name() const = 0;

  virtual Eigen::VectorXd apply(const Eigen::VectorXd& x) const = 0;
  // J_A(x)^T r
  virtual Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const = 0;
  // J_A(x) g; default = fd_probe at kDefaultProbeEta divided by eta.
  virtual Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const;

  virtual bool has_exact_jvp() const { return true; }
  virtual bool is_linear() const { return false; }

  static constexpr double kDefaultProbeEta = 1e-3;

 protected:
  void check_input(const Eigen::VectorXd& x) const;
  void check_output(const Eigen::VectorXd& r) const;
};

using OperatorPtr = std::shared_ptr<const ForwardOperator>;

// A(x + eta*g) - A(x), not divided by eta.
Eigen::VectorXd fd_probe(const ForwardOperator& op, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& g, double eta);

// Materialize a (linearization-free) dense matrix by applying to basis vectors.
// Only meaningful for linear operators; used as an independent cross-check.
Eigen::MatrixXd dense_matrix(const ForwardOperator& op);

// --- concrete operators -----------------------------------------------------

OperatorPtr make_identity(Eigen::Index n);
// keep[i] != 0 marks a retained sample; output is the kept subsequence.
OperatorPtr make_mask(const std::vector<std::uint8_t>& keep);
// circular convolution with centered taps (odd length), 1-D or separable 2-D
OperatorPtr make_blur_1d(Eigen::Index n, const Eigen::VectorXd& taps);
OperatorPtr make_blur_2d(Eigen::Index rows, Eigen::Index cols, const Eigen::VectorXd& taps);
// block average by integer factor
OperatorPtr make_downsample_1d(Eigen::Index n, int factor);
OperatorPtr make_downsample_2d(Eigen::Index rows, Eigen::Index cols, int factor);
// |Hx| for complex H given as real-imag stack [Re; Im] of shape 2m x n
OperatorPtr make_magnitude(const Eigen::MatrixXd& stacked);
// clip(gain*x, lo, hi); derivative at the exact boundary takes the interior value
OperatorPtr make_hdr_clip(Eigen::Index n, double gain = 2.0, double lo = -1.0, double hi = 1.0);
// tanh(sat_gain * blur(x)); no exact forward-mode rule on purpose
OperatorPtr make_blur_saturate_1d(Eigen::Index n, const Eigen::VectorXd& taps, double sat_gain = 3.0);
// x .* x
OperatorPtr make_elementwise_square(Eigen::Index n);
OperatorPtr make_dense_linear(const Eigen::MatrixXd& M);

// Normalized discrete Gaussian taps exp(-d^2/(2 sigma^2)), d = -radius..radius.
Eigen::VectorXd gaussian_blur_taps(double sigma, int radius);
// Unitary DFT of size n as a real-imag stack (2n x n).
Eigen::MatrixXd dft_stacked(Eigen::Index n);

// --- instrumentation ---------------------------------------------------------

struct OpCallCounts {
  long long applies = 0;
  long long vjps = 0;
  long long jvps = 0;
};

// Pass-through wrapper that tallies every call; all budget accounting is read
// off wrappers like this one rather than estimated.
class CountingOperator : public ForwardOperator {
 public:
  explicit CountingOperator(const ForwardOperator& inner)
      : inner_(inner), counts_(std::make_shared<OpCallCounts>()) {}

  Eigen::Index input_dim() const override { return inner_.input_dim(); }
  Eigen::Index output_dim() const override { return inner_.output_dim(); }
  const char* name() const override { return inner_.name(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    ++counts_->applies;
    return inner_.apply(x);
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    ++counts_->vjps;
    return inner_.vjp(x, r);
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    ++counts_->jvps;
    return inner_.jvp(x, g);
  }
  bool has_exact_jvp() const override { return inner_.has_exact_jvp(); }
  bool is_linear() const override { return inner_.is_linear(); }

  const OpCallCounts& counts() const { return *counts_; }
  void reset() { *counts_ = OpCallCounts{}; }

 private:
  const ForwardOperator& inner_;
  std::shared_ptr<OpCallCounts> counts_;
};

// --- config-facing construction ----------------------------------------------

enum class OperatorKind {
  kIdentity,
  kMask,
  kBlur,
  kDownsample,
  kMagnitude,
  kHdrClip,
  kBlurThenSaturate,
};

struct OperatorSpec {
  OperatorKind kind = OperatorKind::kIdentity;
  Eigen::Index rows = 0;  // signal length when cols == 0, else grid rows
  Eigen::Index cols = 0;  // 0 selects the 1-D variants
  double blur_sigma = 2.0;
  int blur_radius = 6;
  std::vector<std::uint8_t> mask_keep;  // required for kMask
  int factor = 2;                       // kDownsample
  Eigen::MatrixXd stacked;              // kMagnitude; empty selects dft_stacked(n)
  double clip_gain = 2.0;               // kHdrClip
  double sat_gain = 3.0;                // kBlurThenSaturate
};

OperatorPtr build_operator(const OperatorSpec& spec);
const char* operator_kind_name(OperatorKind kind);

}  // namespace fastdips
