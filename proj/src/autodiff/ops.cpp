#include "opcert/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "opcert/core/error.hpp"

namespace opcert::ad {
namespace {

// Channel maps over [channels, points] blocks. Every output element is
// accumulated in a fixed order, so results never depend on data alignment.

// y[o,:] (+)= sum_i w[o,i] x[i,:]
void channel_map(const double* w, const double* x, double* y, std::size_t cout, std::size_t cin,
                 std::size_t points) {
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = y + o * points;
    for (std::size_t i = 0; i < cin; ++i) {
      const double wi = w[o * cin + i];
      const double* xi = x + i * points;
      for (std::size_t p = 0; p < points; ++p) yo[p] += wi * xi[p];
    }
  }
}

// gx[i,:] += sum_o w[o,i] gy[o,:]
void channel_map_transposed(const double* w, const double* gy, double* gx, std::size_t cout, std::size_t cin,
                            std::size_t points) {
  for (std::size_t i = 0; i < cin; ++i) {
    double* gi = gx + i * points;
    for (std::size_t o = 0; o < cout; ++o) {
      const double wo = w[o * cin + i];
      const double* go = gy + o * points;
      for (std::size_t p = 0; p < points; ++p) gi[p] += wo * go[p];
    }
  }
}

double strided_dot(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t p = 0;
  for (; p + 4 <= n; p += 4)
    for (std::size_t l = 0; l < 4; ++l) acc[l] += a[p + l] * b[p + l];
  for (; p < n; ++p) acc[0] += a[p] * b[p];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

// gw[o,i] += <gy[o,:], x[i,:]>
void channel_map_weight_grad(const double* gy, const double* x, double* gw, std::size_t cout, std::size_t cin,
                             std::size_t points) {
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i) gw[o * cin + i] += strided_dot(gy + o * points, x + i * points, points);
}

Tape& common_tape(std::initializer_list<Var> vars, const char* op) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    require(v.valid(), ErrorCode::graph_construction, std::string(op) + ": empty operand");
    if (tape == nullptr) tape = v.tape();
    require(v.tape() == tape, ErrorCode::graph_construction,
            std::string(op) + ": operands belong to different tapes");
  }
  return *tape;
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  fail(ErrorCode::graph_construction, std::string(op) + ": " + detail);
}

struct FeatureLayout {
  std::size_t channels;
  std::size_t points;
};

FeatureLayout feature_layout(const Tensor& x, const char* op) {
  if (x.rank() < 2) shape_error(op, "feature tensor needs rank >= 2, got " + shape_string(x.shape()));
  return {x.dim(0), x.size() / x.dim(0)};
}

Shape with_leading(const Shape& shape, std::size_t leading) {
  Shape out = shape;
  out[0] = leading;
  return out;
}

// Splits a tensor into independent grid slices and their spatial extents.
struct SliceLayout {
  std::size_t slices;
  Shape spatial;
  std::size_t slice_size() const { return shape_size(spatial); }
};

SliceLayout slice_layout(const Shape& shape, std::size_t spatial_dims, const char* op) {
  if (spatial_dims != 1 && spatial_dims != 2) shape_error(op, "spatial_dims must be 1 or 2");
  if (shape.size() <= spatial_dims) shape_error(op, "tensor rank too small: " + shape_string(shape));
  SliceLayout layout;
  layout.spatial.assign(shape.end() - static_cast<std::ptrdiff_t>(spatial_dims), shape.end());
  layout.slices = shape_size(shape) / shape_size(layout.spatial);
  return layout;
}

Shape replace_spatial(const Shape& shape, const Shape& spatial) {
  Shape out(shape.begin(), shape.end() - static_cast<std::ptrdiff_t>(spatial.size()));
  out.insert(out.end(), spatial.begin(), spatial.end());
  return out;
}

void check_dyadic(const Shape& padded, std::size_t levels, std::size_t taps, const char* op) {
  if (levels == 0) shape_error(op, "levels must be >= 1");
  for (std::size_t n : padded) {
    if (n % (std::size_t{1} << levels) != 0 || (n >> levels) == 0) {
      fail(ErrorCode::decomposition_depth, std::string(op) + ": extent " + std::to_string(n) +
                                               " cannot support " + std::to_string(levels) +
                                               " levels");
    }
  }
  (void)taps;
}

// Symmetric extension of one slice (pad) and its adjoint (fold).
void pad_slice(const double* src, const Shape& spatial, double* dst, const Shape& padded) {
  if (spatial.size() == 1) {
    for (std::size_t i = 0; i < padded[0]; ++i) dst[i] = src[wavelet::reflect_index(i, spatial[0])];
    return;
  }
  for (std::size_t i = 0; i < padded[0]; ++i) {
    const double* row = src + wavelet::reflect_index(i, spatial[0]) * spatial[1];
    double* out = dst + i * padded[1];
    for (std::size_t j = 0; j < padded[1]; ++j) out[j] = row[wavelet::reflect_index(j, spatial[1])];
  }
}

void fold_slice(const double* src, const Shape& padded, double* dst, const Shape& spatial) {
  if (spatial.size() == 1) {
    for (std::size_t i = 0; i < padded[0]; ++i) dst[wavelet::reflect_index(i, spatial[0])] += src[i];
    return;
  }
  for (std::size_t i = 0; i < padded[0]; ++i) {
    double* row = dst + wavelet::reflect_index(i, spatial[0]) * spatial[1];
    const double* in = src + i * padded[1];
    for (std::size_t j = 0; j < padded[1]; ++j) row[wavelet::reflect_index(j, spatial[1])] += in[j];
  }
}

void crop_slice(const double* src, const Shape& padded, double* dst, const Shape& spatial) {
  if (spatial.size() == 1) {
    std::copy_n(src, spatial[0], dst);
    return;
  }
  for (std::size_t i = 0; i < spatial[0]; ++i) std::copy_n(src + i * padded[1], spatial[1], dst + i * spatial[1]);
}

void uncrop_slice(const double* src, const Shape& spatial, double* dst, const Shape& padded) {
  std::fill_n(dst, shape_size(padded), 0.0);
  if (spatial.size() == 1) {
    std::copy_n(src, spatial[0], dst);
    return;
  }
  for (std::size_t i = 0; i < spatial[0]; ++i) std::copy_n(src + i * spatial[1], spatial[1], dst + i * padded[1]);
}

class PackedTransform {
 public:
  PackedTransform(const WaveletSpec& spec, const Shape& padded)
      : filter_(wavelet::filter(spec.family)), levels_(spec.levels), padded_(padded),
        work_(2 * *std::max_element(padded.begin(), padded.end())) {}

  void forward(double* x) {
    const std::size_t n = shape_size(padded_);
    if (padded_.size() == 1) {
      wavelet::forward_packed({x, n}, filter_, levels_, work_);
    } else {
      wavelet::forward_packed_2d({x, n}, padded_[0], padded_[1], filter_, levels_, work_);
    }
  }

  void inverse(double* x) {
    const std::size_t n = shape_size(padded_);
    if (padded_.size() == 1) {
      wavelet::inverse_packed({x, n}, filter_, levels_, work_);
    } else {
      wavelet::inverse_packed_2d({x, n}, padded_[0], padded_[1], filter_, levels_, work_);
    }
  }

 private:
  const wavelet::Filter& filter_;
  std::size_t levels_;
  Shape padded_;
  std::vector<double> work_;
};

// Visits the packed offsets of the approximation block in row-major order.
template <class F>
void for_each_approx(const Shape& padded, const Shape& approx, F&& f) {
  if (padded.size() == 1) {
    for (std::size_t p = 0; p < approx[0]; ++p) f(p, p);
    return;
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < approx[0]; ++i)
    for (std::size_t j = 0; j < approx[1]; ++j) f(k++, i * padded[1] + j);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu_value(double x) noexcept { return 0.5 * x * std::erfc(-x * kInvSqrt2); }

double gelu_derivative(double x) noexcept {
  return 0.5 * std::erfc(-x * kInvSqrt2) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double vsn_surrogate_grad(double membrane, double threshold, double slope) noexcept {
  const double s = logistic(slope * (membrane - threshold));
  return slope * s * (1.0 - s);
}

Shape approximation_extent(const Shape& padded_spatial, std::size_t levels) {
  Shape out = padded_spatial;
  for (auto& n : out) n >>= levels;
  return out;
}

Var affine(Var x, Var weight, Var bias) {
  Tape& tape = common_tape({x, weight, bias}, "affine");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  const auto [cin, points] = feature_layout(xv, "affine");
  if (wv.rank() != 2 || wv.dim(1) != cin)
    shape_error("affine", "weight " + shape_string(wv.shape()) + " does not match input " +
                              shape_string(xv.shape()));
  const std::size_t cout = wv.dim(0);
  if (bv.rank() != 1 || bv.dim(0) != cout)
    shape_error("affine", "bias " + shape_string(bv.shape()) + " does not match " + std::to_string(cout));

  Tensor out(with_leading(xv.shape(), cout));
  for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.raw() + o * points, points, bv[o]);
  channel_map(wv.raw(), xv.raw(), out.raw(), cout, cin, points);

  const int xi = x.id(), wi = weight.id(), bi = bias.id();
  return tape.record(OpKind::affine, {xi, wi, bi}, std::move(out),
                     [xi, wi, bi, cin, cout, points](Tape& t, int self) {
                       const double* gy = t.grad(self).raw();
                       if (t.needs_grad(xi))
                         channel_map_transposed(t.value(wi).raw(), gy, t.grad(xi).raw(), cout, cin, points);
                       if (t.needs_grad(wi))
                         channel_map_weight_grad(gy, t.value(xi).raw(), t.grad(wi).raw(), cout, cin, points);
                       if (t.needs_grad(bi)) {
                         Tensor& gb = t.grad(bi);
                         const std::vector<double> ones(points, 1.0);
                         for (std::size_t o = 0; o < cout; ++o) gb[o] += strided_dot(gy + o * points, ones.data(), points);
                       }
                     });
}

Var conv1x1(Var x, Var kernel) {
  Tape& tape = common_tape({x, kernel}, "conv1x1");
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const auto [cin, points] = feature_layout(xv, "conv1x1");
  if (kv.rank() != 2 || kv.dim(1) != cin)
    shape_error("conv1x1", "kernel " + shape_string(kv.shape()) + " does not match input " +
                               shape_string(xv.shape()));
  const std::size_t cout = kv.dim(0);
  Tensor out(with_leading(xv.shape(), cout));
  channel_map(kv.raw(), xv.raw(), out.raw(), cout, cin, points);

  const int xi = x.id(), ki = kernel.id();
  return tape.record(OpKind::conv1x1, {xi, ki}, std::move(out), [xi, ki, cin, cout, points](Tape& t, int self) {
    const double* gy = t.grad(self).raw();
    if (t.needs_grad(xi)) channel_map_transposed(t.value(ki).raw(), gy, t.grad(xi).raw(), cout, cin, points);
    if (t.needs_grad(ki)) channel_map_weight_grad(gy, t.value(xi).raw(), t.grad(ki).raw(), cout, cin, points);
  });
}

Var gelu(Var x) {
  Tape& tape = common_tape({x}, "gelu");
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = gelu_value(xv[i]);
  const int xi = x.id();
  return tape.record(OpKind::gelu, {xi}, std::move(out), [xi](Tape& t, int self) {
    if (!t.needs_grad(xi)) return;
    const Tensor& gy = t.grad(self);
    const Tensor& xv = t.value(xi);
    Tensor& gx = t.grad(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * gelu_derivative(xv[i]);
  });
}

Var add(Var a, Var b) {
  Tape& tape = common_tape({a, b}, "add");
  if (a.shape() != b.shape())
    shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  const int ai = a.id(), bi = b.id();
  return tape.record(OpKind::add, {ai, bi}, a.value() + b.value(), [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) t.grad(ai) += g;
    if (t.needs_grad(bi)) t.grad(bi) += g;
  });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape({a, b}, "mul");
  if (a.shape() != b.shape())
    shape_error("mul", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  const int ai = a.id(), bi = b.id();
  return tape.record(OpKind::mul, {ai, bi}, a.value() * b.value(), [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ai)) t.grad(ai) += g * t.value(bi);
    if (t.needs_grad(bi)) t.grad(bi) += g * t.value(ai);
  });
}

Var scale(Var a, double factor) {
  Tape& tape = common_tape({a}, "scale");
  const int ai = a.id();
  return tape.record(OpKind::scale, {ai}, a.value() * factor, [ai, factor](Tape& t, int self) {
    if (t.needs_grad(ai)) t.grad(ai) += t.grad(self) * factor;
  });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = common_tape({a}, "reshape");
  if (shape_size(shape) != a.value().size())
    shape_error("reshape", shape_string(a.shape()) + " -> " + shape_string(shape));
  const int ai = a.id();
  return tape.record(OpKind::reshape, {ai}, a.value().reshaped(std::move(shape)), [ai](Tape& t, int self) {
    if (!t.needs_grad(ai)) return;
    Tensor& g = t.grad(ai);
    const Tensor& gy = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
  });
}

Var sum(Var a) {
  Tape& tape = common_tape({a}, "sum");
  const int ai = a.id();
  return tape.record(OpKind::sum, {ai}, Tensor::scalar(opcert::sum(a.value())), [ai](Tape& t, int self) {
    if (t.needs_grad(ai)) t.grad(ai) += t.grad(self)[0];
  });
}

Var mse(Var prediction, const Tensor& target) {
  Tape& tape = common_tape({prediction}, "mse");
  if (prediction.shape() != target.shape())
    shape_error("mse", shape_string(prediction.shape()) + " vs target " + shape_string(target.shape()));
  auto residual = std::make_shared<Tensor>(prediction.value() - target);
  const double n = static_cast<double>(residual->size());
  const double loss = dot(*residual, *residual) / n;
  const int pi = prediction.id();
  return tape.record(OpKind::mse, {pi}, Tensor::scalar(loss), [pi, residual, n](Tape& t, int self) {
    if (t.needs_grad(pi)) t.grad(pi) += *residual * (2.0 * t.grad(self)[0] / n);
  });
}

Var pinball(Var prediction, const Tensor& target, double eta) {
  Tape& tape = common_tape({prediction}, "pinball");
  require(eta > 0.0 && eta < 1.0, ErrorCode::invalid_argument, "pinball: eta must lie in (0, 1)");
  const Tensor& pv = prediction.value();
  if (pv.shape() != target.shape())
    shape_error("pinball", shape_string(pv.shape()) + " vs target " + shape_string(target.shape()));
  const std::size_t batch = pv.dim(0);
  const std::size_t stride = pv.size() / batch;
  // Per-sample weight / ||residual||, so the gradient is coef * (p - y).
  auto coef = std::make_shared<std::vector<double>>(batch, 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double r2 = 0.0, y2 = 0.0, p2 = 0.0;
    for (std::size_t i = b * stride; i < (b + 1) * stride; ++i) {
      const double d = target[i] - pv[i];
      r2 += d * d;
      y2 += target[i] * target[i];
      p2 += pv[i] * pv[i];
    }
    const double w = y2 >= p2 ? eta : 1.0 - eta;
    const double r = std::sqrt(r2);
    loss += w * r;
    (*coef)[b] = r > 0.0 ? w / r / static_cast<double>(batch) : 0.0;
  }
  loss /= static_cast<double>(batch);
  const int pi = prediction.id();
  auto tgt = std::make_shared<Tensor>(target);
  return tape.record(OpKind::pinball, {pi}, Tensor::scalar(loss), [pi, coef, tgt, stride](Tape& t, int self) {
    if (!t.needs_grad(pi)) return;
    const double g = t.grad(self)[0];
    const Tensor& pv = t.value(pi);
    Tensor& gp = t.grad(pi);
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (*coef)[i / stride] * (pv[i] - (*tgt)[i]);
  });
}

Var dwt(Var x, const WaveletSpec& spec) {
  Tape& tape = common_tape({x}, "dwt");
  const Tensor& xv = x.value();
  const SliceLayout layout = slice_layout(xv.shape(), spec.spatial_dims, "dwt");
  Shape padded = layout.spatial;
  for (auto& n : padded) n = wavelet::padded_extent(n, spec.levels);
  check_dyadic(padded, spec.levels, wavelet::filter(spec.family).taps(), "dwt");
  const std::size_t in_size = layout.slice_size();
  const std::size_t out_size = shape_size(padded);

  Tensor out(replace_spatial(xv.shape(), padded));
  PackedTransform transform(spec, padded);
  for (std::size_t s = 0; s < layout.slices; ++s) {
    double* dst = out.raw() + s * out_size;
    pad_slice(xv.raw() + s * in_size, layout.spatial, dst, padded);
    transform.forward(dst);
  }

  const int xi = x.id();
  return tape.record(OpKind::dwt, {xi}, std::move(out),
                     [xi, spec, layout, padded, in_size, out_size](Tape& t, int self) {
                       if (!t.needs_grad(xi)) return;
                       const Tensor& gy = t.grad(self);
                       Tensor& gx = t.grad(xi);
                       PackedTransform transform(spec, padded);
                       std::vector<double> buffer(out_size);
                       for (std::size_t s = 0; s < layout.slices; ++s) {
                         std::copy_n(gy.raw() + s * out_size, out_size, buffer.data());
                         transform.inverse(buffer.data());
                         fold_slice(buffer.data(), padded, gx.raw() + s * in_size, layout.spatial);
                       }
                     });
}

Var idwt(Var coeffs, const WaveletSpec& spec, const Shape& spatial_shape) {
  Tape& tape = common_tape({coeffs}, "idwt");
  const Tensor& cv = coeffs.value();
  const SliceLayout layout = slice_layout(cv.shape(), spec.spatial_dims, "idwt");
  if (spatial_shape.size() != spec.spatial_dims) shape_error("idwt", "target spatial rank mismatch");
  for (std::size_t d = 0; d < spatial_shape.size(); ++d) {
    if (wavelet::padded_extent(spatial_shape[d], spec.levels) != layout.spatial[d])
      fail(ErrorCode::invalid_coefficients, "idwt: coefficient extents " + shape_string(layout.spatial) +
                                                " do not match target " + shape_string(spatial_shape));
  }
  const Shape padded = layout.spatial;
  check_dyadic(padded, spec.levels, wavelet::filter(spec.family).taps(), "idwt");
  const std::size_t in_size = layout.slice_size();
  const std::size_t out_size = shape_size(spatial_shape);

  Tensor out(replace_spatial(cv.shape(), spatial_shape));
  PackedTransform transform(spec, padded);
  std::vector<double> buffer(in_size);
  for (std::size_t s = 0; s < layout.slices; ++s) {
    std::copy_n(cv.raw() + s * in_size, in_size, buffer.data());
    transform.inverse(buffer.data());
    crop_slice(buffer.data(), padded, out.raw() + s * out_size, spatial_shape);
  }

  const int ci = coeffs.id();
  return tape.record(OpKind::idwt, {ci}, std::move(out),
                     [ci, spec, layout, padded, spatial_shape, in_size, out_size](Tape& t, int self) {
                       if (!t.needs_grad(ci)) return;
                       const Tensor& gy = t.grad(self);
                       Tensor& gc = t.grad(ci);
                       PackedTransform transform(spec, padded);
                       std::vector<double> buffer(in_size);
                       for (std::size_t s = 0; s < layout.slices; ++s) {
                         uncrop_slice(gy.raw() + s * out_size, spatial_shape, buffer.data(), padded);
                         transform.forward(buffer.data());
                         double* dst = gc.raw() + s * in_size;
                         for (std::size_t i = 0; i < in_size; ++i) dst[i] += buffer[i];
                       }
                     });
}

Var wavelet_scale(Var coeffs, Var weights, const WaveletSpec& spec) {
  Tape& tape = common_tape({coeffs, weights}, "wavelet_scale");
  const Tensor& cv = coeffs.value();
  const Tensor& rv = weights.value();
  const SliceLayout layout = slice_layout(cv.shape(), spec.spatial_dims, "wavelet_scale");
  if (cv.rank() < spec.spatial_dims + 1) shape_error("wavelet_scale", "missing channel axis");
  const Shape padded = layout.spatial;
  const Shape approx = approximation_extent(padded, spec.levels);
  const std::size_t A = shape_size(approx);
  if (A == 0) fail(ErrorCode::decomposition_depth, "wavelet_scale: empty approximation block");
  const std::size_t C = cv.dim(0);
  const std::size_t slice = layout.slice_size();
  const std::size_t per_channel = layout.slices / C;  // batch slices per channel

  const bool mixing = rv.rank() == 3;
  if (mixing) {
    if (rv.dim(0) != C || rv.dim(1) != C || rv.dim(2) != A)
      shape_error("wavelet_scale", "mixing weights " + shape_string(rv.shape()) + " need [" +
                                       std::to_string(C) + ", " + std::to_string(C) + ", " +
                                       std::to_string(A) + "]");
  } else if (rv.rank() != 2 || rv.dim(0) != C || rv.dim(1) != A) {
    shape_error("wavelet_scale", "weights " + shape_string(rv.shape()) + " need [" + std::to_string(C) +
                                     ", " + std::to_string(A) + "]");
  }

  std::vector<std::size_t> offsets(A);
  for_each_approx(padded, approx, [&](std::size_t k, std::size_t off) { offsets[k] = off; });
  auto offs = std::make_shared<const std::vector<std::size_t>>(std::move(offsets));

  Tensor out = cv;
  if (mixing) {
    for (std::size_t o = 0; o < C; ++o)
      for (std::size_t b = 0; b < per_channel; ++b) {
        double* dst = out.raw() + (o * per_channel + b) * slice;
        for (std::size_t k = 0; k < A; ++k) dst[(*offs)[k]] = 0.0;
      }
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t o = 0; o < C; ++o) {
        const double* r = rv.raw() + (c * C + o) * A;
        for (std::size_t b = 0; b < per_channel; ++b) {
          const double* src = cv.raw() + (c * per_channel + b) * slice;
          double* dst = out.raw() + (o * per_channel + b) * slice;
          for (std::size_t k = 0; k < A; ++k) dst[(*offs)[k]] += r[k] * src[(*offs)[k]];
        }
      }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      const double* r = rv.raw() + c * A;
      for (std::size_t b = 0; b < per_channel; ++b) {
        double* dst = out.raw() + (c * per_channel + b) * slice;
        for (std::size_t k = 0; k < A; ++k) dst[(*offs)[k]] *= r[k];
      }
    }
  }

  const int ci = coeffs.id(), ri = weights.id();
  return tape.record(
      OpKind::wavelet_scale, {ci, ri}, std::move(out),
      [ci, ri, mixing, C, A, slice, per_channel, offs](Tape& t, int self) {
        const Tensor& gy = t.grad(self);
        const Tensor& cv = t.value(ci);
        const Tensor& rv = t.value(ri);
        const auto& off = *offs;
        if (t.needs_grad(ci)) {
          Tensor& gc = t.grad(ci);
          // Details pass straight through.
          std::vector<bool> in_approx(slice, false);
          for (std::size_t k = 0; k < A; ++k) in_approx[off[k]] = true;
          for (std::size_t s = 0; s < C * per_channel; ++s)
            for (std::size_t i = 0; i < slice; ++i)
              if (!in_approx[i]) gc[s * slice + i] += gy[s * slice + i];
          for (std::size_t c = 0; c < C; ++c) {
            if (mixing) {
              for (std::size_t o = 0; o < C; ++o) {
                const double* r = rv.raw() + (c * C + o) * A;
                for (std::size_t b = 0; b < per_channel; ++b) {
                  const double* g = gy.raw() + (o * per_channel + b) * slice;
                  double* dst = gc.raw() + (c * per_channel + b) * slice;
                  for (std::size_t k = 0; k < A; ++k) dst[off[k]] += r[k] * g[off[k]];
                }
              }
            } else {
              const double* r = rv.raw() + c * A;
              for (std::size_t b = 0; b < per_channel; ++b) {
                const double* g = gy.raw() + (c * per_channel + b) * slice;
                double* dst = gc.raw() + (c * per_channel + b) * slice;
                for (std::size_t k = 0; k < A; ++k) dst[off[k]] += r[k] * g[off[k]];
              }
            }
          }
        }
        if (t.needs_grad(ri)) {
          Tensor& gr = t.grad(ri);
          for (std::size_t c = 0; c < C; ++c) {
            if (mixing) {
              for (std::size_t o = 0; o < C; ++o) {
                double* dr = gr.raw() + (c * C + o) * A;
                for (std::size_t b = 0; b < per_channel; ++b) {
                  const double* src = cv.raw() + (c * per_channel + b) * slice;
                  const double* g = gy.raw() + (o * per_channel + b) * slice;
                  for (std::size_t k = 0; k < A; ++k) dr[k] += src[off[k]] * g[off[k]];
                }
              }
            } else {
              double* dr = gr.raw() + c * A;
              for (std::size_t b = 0; b < per_channel; ++b) {
                const double* src = cv.raw() + (c * per_channel + b) * slice;
                const double* g = gy.raw() + (c * per_channel + b) * slice;
                for (std::size_t k = 0; k < A; ++k) dr[k] += src[off[k]] * g[off[k]];
              }
            }
          }
        }
      });
}

namespace {

// Forward trace of the neuron recurrence; one entry per (step, neuron).
struct VsnTrace {
  std::size_t steps = 0;
  std::size_t size = 0;
  std::vector<double> pre;    // membrane before the spike decision
  std::vector<double> spike;  // spike indicator (or its smooth stand-in)
};

void vsn_backward(Tape& t, const VsnTrace& trace, const VsnOptions& opt, int xi, int li, int ti,
                  const Tensor* g_out, const Tensor* g_spk) {
  const Tensor& xv = t.value(xi);
  const Tensor& lv = t.value(li);
  const Tensor& tv = t.value(ti);
  const std::size_t C = xv.dim(0);
  const std::size_t per = xv.size() / C;
  const std::size_t T = trace.steps;
  const double inv_t = 1.0 / static_cast<double>(T);
  Tensor* gx = t.needs_grad(xi) ? &t.grad(xi) : nullptr;
  Tensor* gl = t.needs_grad(li) ? &t.grad(li) : nullptr;
  Tensor* gt = t.needs_grad(ti) ? &t.grad(ti) : nullptr;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const std::size_t c = i / per;
    const double beta = lv[c], th = tv[c], x = xv[i];
    const double ybar = g_out ? (*g_out)[i] * inv_t : 0.0;
    const double sbar = g_spk ? (*g_spk)[i] * inv_t : 0.0;
    double m_bar = 0.0, x_bar = 0.0, beta_bar = 0.0, th_bar = 0.0;
    for (std::size_t step = T; step-- > 0;) {
      const double p = trace.pre[step * trace.size + i];
      const double s = trace.spike[step * trace.size + i];
      const double gd = gelu_derivative(s * x);
      x_bar += ybar * gd * s;
      double s_adj = ybar * gd * x + sbar - m_bar * p;
      double p_adj = m_bar * (1.0 - s);
      const double ds = vsn_surrogate_grad(p, th, opt.slope);
      p_adj += s_adj * ds;
      th_bar -= s_adj * ds;
      x_bar += p_adj;
      if (step > 0) {
        const double prev_p = trace.pre[(step - 1) * trace.size + i];
        const double prev_s = trace.spike[(step - 1) * trace.size + i];
        beta_bar += p_adj * prev_p * (1.0 - prev_s);
      }
      m_bar = p_adj * beta;
    }
    if (gx) (*gx)[i] += x_bar;
    if (gl) (*gl)[c] += beta_bar;
    if (gt) (*gt)[c] += th_bar;
  }
}

}  // namespace

VsnResult vsn(Var x, Var leak, Var threshold, const VsnOptions& options) {
  Tape& tape = common_tape({x, leak, threshold}, "vsn");
  const Tensor& xv = x.value();
  const auto [C, per] = feature_layout(xv, "vsn");
  if (leak.shape() != Shape{C} || threshold.shape() != Shape{C})
    shape_error("vsn", "leak and threshold must have shape [" + std::to_string(C) + "]");
  require(options.steps >= 1, ErrorCode::invalid_argument, "vsn: steps must be >= 1");
  require(options.slope > 0.0, ErrorCode::invalid_argument, "vsn: slope must be positive");

  const Tensor& lv = leak.value();
  const Tensor& tv = threshold.value();
  auto trace = std::make_shared<VsnTrace>();
  trace->steps = options.steps;
  trace->size = xv.size();
  trace->pre.resize(options.steps * xv.size());
  trace->spike.resize(options.steps * xv.size());
  Tensor out(xv.shape()), spikes(xv.shape());
  const double inv_t = 1.0 / static_cast<double>(options.steps);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const std::size_t c = i / per;
    double m = 0.0, acc_y = 0.0, acc_s = 0.0;
    for (std::size_t step = 0; step < options.steps; ++step) {
      const double p = lv[c] * m + xv[i];
      const double s = options.mode == SpikeMode::hard ? (p >= tv[c] ? 1.0 : 0.0)
                                                       : logistic(options.slope * (p - tv[c]));
      trace->pre[step * xv.size() + i] = p;
      trace->spike[step * xv.size() + i] = s;
      m = p * (1.0 - s);
      acc_y += gelu_value(s * xv[i]);
      acc_s += s;
    }
    out[i] = acc_y * inv_t;
    spikes[i] = acc_s * inv_t;
  }

  const int xi = x.id(), li = leak.id(), ti = threshold.id();
  VsnResult result;
  result.output = tape.record(OpKind::vsn, {xi, li, ti}, std::move(out),
                              [trace, options, xi, li, ti](Tape& t, int self) {
                                vsn_backward(t, *trace, options, xi, li, ti, &t.grad(self), nullptr);
                              });
  result.spikes = tape.record(OpKind::vsn_spikes, {xi, li, ti}, std::move(spikes),
                              [trace, options, xi, li, ti](Tape& t, int self) {
                                vsn_backward(t, *trace, options, xi, li, ti, nullptr, &t.grad(self));
                              });
  return result;
}

}  // namespace opcert::ad
