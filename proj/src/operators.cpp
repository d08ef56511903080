#include "fastdips/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace fastdips {

namespace {

[[noreturn]] void dim_error(const char* op_name, const char* what, Eigen::Index got,
                            Eigen::Index want) {
  throw std::invalid_argument(std::string(op_name) + ": " + what + " has length " +
                              std::to_string(got) + ", expected " + std::to_string(want));
}

Eigen::Index mod_index(Eigen::Index i, Eigen::Index n) {
  Eigen::Index m = i % n;
  return m < 0 ? m + n : m;
}

// out[i] = sum_d taps[d+r] * x[(i+d) mod n]
void circular_conv_1d(const Eigen::VectorXd& taps, const double* x, double* out,
                      Eigen::Index n, Eigen::Index stride) {
  const Eigen::Index r = (taps.size() - 1) / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index d = -r; d <= r; ++d)
      acc += taps[d + r] * x[mod_index(i + d, n) * stride];
    out[i * stride] = acc;
  }
}

Eigen::VectorXd conv_1d(const Eigen::VectorXd& taps, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  circular_conv_1d(taps, x.data(), out.data(), x.size(), 1);
  return out;
}

// Separable circular convolution on a rows x cols grid stored row-major.
Eigen::VectorXd conv_2d(const Eigen::VectorXd& taps, const Eigen::VectorXd& x,
                        Eigen::Index rows, Eigen::Index cols) {
  Eigen::VectorXd tmp(x.size()), out(x.size());
  for (Eigen::Index i = 0; i < rows; ++i)
    circular_conv_1d(taps, x.data() + i * cols, tmp.data() + i * cols, cols, 1);
  for (Eigen::Index j = 0; j < cols; ++j)
    circular_conv_1d(taps, tmp.data() + j, out.data() + j, rows, cols);
  return out;
}

class Identity final : public ForwardOperator {
 public:
  explicit Identity(Eigen::Index n) : n_(n) {}
  Eigen::Index input_dim() const override { return n_; }
  Eigen::Index output_dim() const override { return n_; }
  const char* name() const override { return "identity"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    return x;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    return r;
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    check_input(g);
    return g;
  }
  bool is_linear() const override { return true; }

 private:
  Eigen::Index n_;
};

class Mask final : public ForwardOperator {
 public:
  explicit Mask(const std::vector<std::uint8_t>& keep) : n_(keep.size()) {
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (keep[i]) kept_.push_back(static_cast<Eigen::Index>(i));
    if (kept_.empty()) throw std::invalid_argument("mask: bitmap keeps no samples");
  }
  Eigen::Index input_dim() const override { return n_; }
  Eigen::Index output_dim() const override { return static_cast<Eigen::Index>(kept_.size()); }
  const char* name() const override { return "mask"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    Eigen::VectorXd out(output_dim());
    for (std::size_t j = 0; j < kept_.size(); ++j) out[j] = x[kept_[j]];
    return out;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (std::size_t j = 0; j < kept_.size(); ++j) out[kept_[j]] = r[j];
    return out;
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    return apply(g);
  }
  bool is_linear() const override { return true; }

 private:
  Eigen::Index n_;
  std::vector<Eigen::Index> kept_;
};

class Blur final : public ForwardOperator {
 public:
  Blur(Eigen::Index rows, Eigen::Index cols, const Eigen::VectorXd& taps)
      : rows_(rows), cols_(cols), taps_(taps), rtaps_(taps.reverse()) {
    if (taps.size() % 2 == 0) throw std::invalid_argument("blur: taps length must be odd");
    const Eigen::Index extent = cols_ == 0 ? rows_ : std::min(rows_, cols_);
    if (taps.size() > extent)
      throw std::invalid_argument("blur: kernel wider than the grid");
  }
  Eigen::Index input_dim() const override { return cols_ == 0 ? rows_ : rows_ * cols_; }
  Eigen::Index output_dim() const override { return input_dim(); }
  const char* name() const override { return "blur"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    return cols_ == 0 ? conv_1d(taps_, x) : conv_2d(taps_, x, rows_, cols_);
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    return cols_ == 0 ? conv_1d(rtaps_, r) : conv_2d(rtaps_, r, rows_, cols_);
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    return apply(g);
  }
  bool is_linear() const override { return true; }

 private:
  Eigen::Index rows_, cols_;
  Eigen::VectorXd taps_, rtaps_;
};

class Downsample final : public ForwardOperator {
 public:
  Downsample(Eigen::Index rows, Eigen::Index cols, int factor)
      : rows_(rows), cols_(cols), f_(factor) {
    if (f_ <= 0) throw std::invalid_argument("downsample: factor must be positive");
    if (rows_ % f_ != 0 || (cols_ != 0 && cols_ % f_ != 0))
      throw std::invalid_argument("downsample: factor must divide the grid");
  }
  Eigen::Index input_dim() const override { return cols_ == 0 ? rows_ : rows_ * cols_; }
  Eigen::Index output_dim() const override {
    return cols_ == 0 ? rows_ / f_ : (rows_ / f_) * (cols_ / f_);
  }
  const char* name() const override { return "downsample"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    Eigen::VectorXd out(output_dim());
    if (cols_ == 0) {
      for (Eigen::Index b = 0; b < out.size(); ++b)
        out[b] = x.segment(b * f_, f_).mean();
    } else {
      const Eigen::Index bc = cols_ / f_;
      for (Eigen::Index bi = 0; bi < rows_ / f_; ++bi)
        for (Eigen::Index bj = 0; bj < bc; ++bj) {
          double acc = 0.0;
          for (int di = 0; di < f_; ++di)
            for (int dj = 0; dj < f_; ++dj)
              acc += x[(bi * f_ + di) * cols_ + bj * f_ + dj];
          out[bi * bc + bj] = acc / (f_ * f_);
        }
    }
    return out;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    Eigen::VectorXd out(input_dim());
    if (cols_ == 0) {
      for (Eigen::Index b = 0; b < r.size(); ++b)
        out.segment(b * f_, f_).setConstant(r[b] / f_);
    } else {
      const Eigen::Index bc = cols_ / f_;
      for (Eigen::Index bi = 0; bi < rows_ / f_; ++bi)
        for (Eigen::Index bj = 0; bj < bc; ++bj) {
          const double v = r[bi * bc + bj] / (f_ * f_);
          for (int di = 0; di < f_; ++di)
            for (int dj = 0; dj < f_; ++dj)
              out[(bi * f_ + di) * cols_ + bj * f_ + dj] = v;
        }
    }
    return out;
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    return apply(g);
  }
  bool is_linear() const override { return true; }

 private:
  Eigen::Index rows_, cols_;
  int f_;
};

class Magnitude final : public ForwardOperator {
 public:
  explicit Magnitude(const Eigen::MatrixXd& stacked) : stacked_(stacked) {
    if (stacked_.rows() == 0 || stacked_.rows() % 2 != 0)
      throw std::invalid_argument("magnitude: stacked transform needs an even row count");
  }
  Eigen::Index input_dim() const override { return stacked_.cols(); }
  Eigen::Index output_dim() const override { return stacked_.rows() / 2; }
  const char* name() const override { return "magnitude"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    const Eigen::Index m = output_dim();
    const Eigen::VectorXd c = stacked_.topRows(m) * x;
    const Eigen::VectorXd d = stacked_.bottomRows(m) * x;
    return (c.array().square() + d.array().square()).sqrt();
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    const Eigen::Index m = output_dim();
    const Eigen::VectorXd c = stacked_.topRows(m) * x;
    const Eigen::VectorXd d = stacked_.bottomRows(m) * x;
    Eigen::VectorXd wc(m), wd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double mag = std::hypot(c[i], d[i]);
      // subgradient 0 at the nonsmooth origin
      const double s = mag > 0.0 ? r[i] / mag : 0.0;
      wc[i] = s * c[i];
      wd[i] = s * d[i];
    }
    return stacked_.topRows(m).transpose() * wc + stacked_.bottomRows(m).transpose() * wd;
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    check_input(g);
    const Eigen::Index m = output_dim();
    const Eigen::VectorXd c = stacked_.topRows(m) * x;
    const Eigen::VectorXd d = stacked_.bottomRows(m) * x;
    const Eigen::VectorXd dc = stacked_.topRows(m) * g;
    const Eigen::VectorXd dd = stacked_.bottomRows(m) * g;
    Eigen::VectorXd out(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double mag = std::hypot(c[i], d[i]);
      out[i] = mag > 0.0 ? (c[i] * dc[i] + d[i] * dd[i]) / mag : 0.0;
    }
    return out;
  }

 private:
  Eigen::MatrixXd stacked_;
};

class HdrClip final : public ForwardOperator {
 public:
  HdrClip(Eigen::Index n, double gain, double lo, double hi)
      : n_(n), gain_(gain), lo_(lo), hi_(hi) {
    if (!(hi_ > lo_)) throw std::invalid_argument("hdr_clip: need hi > lo");
    if (gain_ == 0.0) throw std::invalid_argument("hdr_clip: gain must be nonzero");
  }
  Eigen::Index input_dim() const override { return n_; }
  Eigen::Index output_dim() const override { return n_; }
  const char* name() const override { return "hdr_clip"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    return (gain_ * x.array()).cwiseMin(hi_).cwiseMax(lo_);
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    Eigen::VectorXd out(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double u = gain_ * x[i];
      // boundary points use the interior derivative
      out[i] = (u >= lo_ && u <= hi_) ? gain_ * r[i] : 0.0;
    }
    return out;
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    check_input(g);
    Eigen::VectorXd out(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double u = gain_ * x[i];
      out[i] = (u >= lo_ && u <= hi_) ? gain_ * g[i] : 0.0;
    }
    return out;
  }

 private:
  Eigen::Index n_;
  double gain_, lo_, hi_;
};

class BlurSaturate final : public ForwardOperator {
 public:
  BlurSaturate(Eigen::Index n, const Eigen::VectorXd& taps, double sat_gain)
      : blur_(n, 0, taps), gain_(sat_gain) {
    if (!(gain_ > 0.0)) throw std::invalid_argument("blur_then_saturate: gain must be positive");
  }
  Eigen::Index input_dim() const override { return blur_.input_dim(); }
  Eigen::Index output_dim() const override { return blur_.output_dim(); }
  const char* name() const override { return "blur_then_saturate"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    return (gain_ * blur_.apply(x).array()).tanh();
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_output(r);
    const Eigen::ArrayXd t = (gain_ * blur_.apply(x).array()).tanh();
    return blur_.vjp(x, (gain_ * (1.0 - t.square()) * r.array()).matrix());
  }
  // No exact forward-mode rule: the base-class probe fallback is the point.
  bool has_exact_jvp() const override { return false; }

 private:
  Blur blur_;
  double gain_;
};

class ElementwiseSquare final : public ForwardOperator {
 public:
  explicit ElementwiseSquare(Eigen::Index n) : n_(n) {}
  Eigen::Index input_dim() const override { return n_; }
  Eigen::Index output_dim() const override { return n_; }
  const char* name() const override { return "elementwise_square"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    return x.array().square();
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    return 2.0 * x.cwiseProduct(r);
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    check_input(g);
    return 2.0 * x.cwiseProduct(g);
  }

 private:
  Eigen::Index n_;
};

class DenseLinear final : public ForwardOperator {
 public:
  explicit DenseLinear(const Eigen::MatrixXd& M) : M_(M) {
    if (M_.rows() == 0 || M_.cols() == 0)
      throw std::invalid_argument("dense_linear: empty matrix");
  }
  Eigen::Index input_dim() const override { return M_.cols(); }
  Eigen::Index output_dim() const override { return M_.rows(); }
  const char* name() const override { return "dense_linear"; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_input(x);
    return M_ * x;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const override {
    check_input(x);
    check_output(r);
    return M_.transpose() * r;
  }
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const override {
    check_input(x);
    return M_ * g;
  }
  bool is_linear() const override { return true; }

 private:
  Eigen::MatrixXd M_;
};

}  // namespace

void ForwardOperator::check_input(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) dim_error(name(), "input", x.size(), input_dim());
}

void ForwardOperator::check_output(const Eigen::VectorXd& r) const {
  if (r.size() != output_dim()) dim_error(name(), "residual", r.size(), output_dim());
}

Eigen::VectorXd ForwardOperator::jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const {
  return fd_probe(*this, x, g, kDefaultProbeEta) / kDefaultProbeEta;
}

Eigen::VectorXd fd_probe(const ForwardOperator& op, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& g, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("fd_probe: eta must be positive");
  return op.apply(x + eta * g) - op.apply(x);
}

Eigen::MatrixXd dense_matrix(const ForwardOperator& op) {
  Eigen::MatrixXd M(op.output_dim(), op.input_dim());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(op.input_dim());
  for (Eigen::Index j = 0; j < op.input_dim(); ++j) {
    e[j] = 1.0;
    M.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return M;
}

OperatorPtr make_identity(Eigen::Index n) { return std::make_shared<Identity>(n); }
OperatorPtr make_mask(const std::vector<std::uint8_t>& keep) {
  return std::make_shared<Mask>(keep);
}
OperatorPtr make_blur_1d(Eigen::Index n, const Eigen::VectorXd& taps) {
  return std::make_shared<Blur>(n, 0, taps);
}
OperatorPtr make_blur_2d(Eigen::Index rows, Eigen::Index cols, const Eigen::VectorXd& taps) {
  return std::make_shared<Blur>(rows, cols, taps);
}
OperatorPtr make_downsample_1d(Eigen::Index n, int factor) {
  return std::make_shared<Downsample>(n, 0, factor);
}
OperatorPtr make_downsample_2d(Eigen::Index rows, Eigen::Index cols, int factor) {
  return std::make_shared<Downsample>(rows, cols, factor);
}
OperatorPtr make_magnitude(const Eigen::MatrixXd& stacked) {
  return std::make_shared<Magnitude>(stacked);
}
OperatorPtr make_hdr_clip(Eigen::Index n, double gain, double lo, double hi) {
  return std::make_shared<HdrClip>(n, gain, lo, hi);
}
OperatorPtr make_blur_saturate_1d(Eigen::Index n, const Eigen::VectorXd& taps, double sat_gain) {
  return std::make_shared<BlurSaturate>(n, taps, sat_gain);
}
OperatorPtr make_elementwise_square(Eigen::Index n) {
  return std::make_shared<ElementwiseSquare>(n);
}
OperatorPtr make_dense_linear(const Eigen::MatrixXd& M) {
  return std::make_shared<DenseLinear>(M);
}

Eigen::VectorXd gaussian_blur_taps(double sigma, int radius) {
  if (!(sigma > 0.0) || radius < 0)
    throw std::invalid_argument("blur taps: need sigma > 0 and radius >= 0");
  Eigen::VectorXd taps(2 * radius + 1);
  for (int d = -radius; d <= radius; ++d)
    taps[d + radius] = std::exp(-0.5 * d * d / (sigma * sigma));
  return taps / taps.sum();
}

Eigen::MatrixXd dft_stacked(Eigen::Index n) {
  Eigen::MatrixXd T(2 * n, n);
  const double w = 2.0 * M_PI / static_cast<double>(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      T(j, k) = scale * std::cos(w * j * k);
      T(n + j, k) = -scale * std::sin(w * j * k);
    }
  return T;
}

const char* operator_kind_name(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::kIdentity: return "identity";
    case OperatorKind::kMask: return "mask";
    case OperatorKind::kBlur: return "blur";
    case OperatorKind::kDownsample: return "downsample";
    case OperatorKind::kMagnitude: return "magnitude";
    case OperatorKind::kHdrClip: return "hdr_clip";
    case OperatorKind::kBlurThenSaturate: return "blur_then_saturate";
  }
  return "unknown";
}

OperatorPtr build_operator(const OperatorSpec& spec) {
  const Eigen::Index n = spec.cols == 0 ? spec.rows : spec.rows * spec.cols;
  if (n <= 0) throw std::invalid_argument("operator spec: empty signal");
  switch (spec.kind) {
    case OperatorKind::kIdentity:
      return make_identity(n);
    case OperatorKind::kMask: {
      if (static_cast<Eigen::Index>(spec.mask_keep.size()) != n)
        throw std::invalid_argument("operator spec: mask bitmap length != signal length");
      return make_mask(spec.mask_keep);
    }
    case OperatorKind::kBlur: {
      const Eigen::VectorXd taps = gaussian_blur_taps(spec.blur_sigma, spec.blur_radius);
      return spec.cols == 0 ? make_blur_1d(spec.rows, taps)
                            : make_blur_2d(spec.rows, spec.cols, taps);
    }
    case OperatorKind::kDownsample:
      return spec.cols == 0 ? make_downsample_1d(spec.rows, spec.factor)
                            : make_downsample_2d(spec.rows, spec.cols, spec.factor);
    case OperatorKind::kMagnitude: {
      if (spec.stacked.size() == 0) return make_magnitude(dft_stacked(n));
      if (spec.stacked.cols() != n)
        throw std::invalid_argument("operator spec: stacked transform width != signal length");
      return make_magnitude(spec.stacked);
    }
    case OperatorKind::kHdrClip:
      return make_hdr_clip(n, spec.clip_gain);
    case OperatorKind::kBlurThenSaturate: {
      if (spec.cols != 0)
        throw std::invalid_argument("operator spec: blur_then_saturate is 1-D only");
      const Eigen::VectorXd taps = gaussian_blur_taps(spec.blur_sigma, spec.blur_radius);
      return make_blur_saturate_1d(spec.rows, taps, spec.sat_gain);
    }
  }
  throw std::invalid_argument("operator spec: unknown kind");
}

}  // namespace fastdips
