#include "rmat/ops.hpp"

#include <algorithm>
#include <cmath>

namespace rmat::ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    const int n = std::max(a.ndim(), b.ndim());
    int axis = 0;
    for (; axis < n; ++axis) {
      if (axis >= a.ndim() || axis >= b.ndim() || a.dim(axis) != b.dim(axis)) break;
    }
    throw DimensionError(std::string(op) + ": operand shapes " + a.shape_str() + " and " +
                         b.shape_str() + " differ at axis " + std::to_string(axis));
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* src = a.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) dst[i] = f(pa[i], pb[i]);
  return out;
}

struct AxisSpan {
  std::size_t outer, extent, inner;
};

AxisSpan axis_span(const Tensor& x, int axis, const char* op) {
  if (axis < 0 || axis >= x.ndim()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + x.shape_str());
  }
  AxisSpan s{1, static_cast<std::size_t>(x.dim(axis)), 1};
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(x.dim(i));
  for (int i = axis + 1; i < x.ndim(); ++i) s.inner *= static_cast<std::size_t>(x.dim(i));
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return zip(a, b, "div", [](double x, double y) { return x / y; });
}

Tensor scale(const Tensor& a, double c) {
  return map(a, [c](double x) { return c * x; });
}

Tensor square(const Tensor& a) {
  return map(a, [](double x) { return x * x; });
}

Tensor sqrt(const Tensor& a) {
  return map(a, [](double x) { return std::sqrt(x); });
}

Tensor log(const Tensor& a) {
  return map(a, [](double x) { return std::log(x); });
}

Tensor sigmoid(const Tensor& a) {
  return map(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor relu(const Tensor& a) {
  return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor elu(const Tensor& a) {
  return map(a, [](double x) { return x > 0.0 ? x : std::expm1(x); });
}

Tensor tanh(const Tensor& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return map(a, [slope](double x) { return x > 0.0 ? x : slope * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return map(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); });
}

int conv_out_extent(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

void check_conv_args(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride,
                     int padding) {
  if (x.ndim() != 3) {
    throw DimensionError("conv2d: input must be [c,h,w], got " + x.shape_str());
  }
  if (kernel.ndim() != 4) {
    throw DimensionError("conv2d: kernel must be [c_out,c_in,kh,kw], got " + kernel.shape_str());
  }
  if (kernel.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d: kernel input-channel axis 1 is " +
                         std::to_string(kernel.dim(1)) + " but input channel axis 0 is " +
                         std::to_string(x.dim(0)));
  }
  if (bias.ndim() != 1 || bias.dim(0) != kernel.dim(0)) {
    throw DimensionError("conv2d: bias axis 0 must have size " + std::to_string(kernel.dim(0)) +
                         ", got " + bias.shape_str());
  }
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
  if (kernel.dim(2) > x.dim(1) + 2 * padding) {
    throw DimensionError("conv2d: kernel extent " + std::to_string(kernel.dim(2)) +
                         " exceeds padded input height axis 1 = " +
                         std::to_string(x.dim(1) + 2 * padding));
  }
  if (kernel.dim(3) > x.dim(2) + 2 * padding) {
    throw DimensionError("conv2d: kernel extent " + std::to_string(kernel.dim(3)) +
                         " exceeds padded input width axis 2 = " +
                         std::to_string(x.dim(2) + 2 * padding));
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
  check_conv_args(x, kernel, bias, stride, padding);
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int oh = conv_out_extent(h, kh, stride, padding);
  const int ow = conv_out_extent(w, kw, stride, padding);
  Tensor out({co, oh, ow});
  double* po = out.data();
  const double* px = x.data();
  const double* pk = kernel.data();
  const double* pb = bias.data();

  for (int c = 0; c < co; ++c) {
    double* plane = po + static_cast<std::size_t>(c) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) plane[i] = pb[c];
  }
  // Accumulate one (c_out, c_in, ky, kx) kernel tap at a time; the inner x
  // loop is contiguous over both input and output rows.
  for (int c = 0; c < co; ++c) {
    for (int d = 0; d < ci; ++d) {
      const double* xin = px + static_cast<std::size_t>(d) * h * w;
      double* plane = po + static_cast<std::size_t>(c) * oh * ow;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double wgt = pk[((static_cast<std::size_t>(c) * ci + d) * kh + ky) * kw + kx];
          if (wgt == 0.0) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xin + static_cast<std::size_t>(iy) * w;
            double* orow = plane + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kx - padding;
              if (ix < 0 || ix >= w) continue;
              orow[ox] += wgt * xrow[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& gout, int stride,
                     int padding, Tensor* gx, Tensor* gkernel, Tensor* gbias) {
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int oh = gout.dim(1), ow = gout.dim(2);
  const double* px = x.data();
  const double* pk = kernel.data();
  const double* pg = gout.data();

  if (gbias) {
    double* pb = gbias->data();
    for (int c = 0; c < co; ++c) {
      const double* plane = pg + static_cast<std::size_t>(c) * oh * ow;
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i) acc += plane[i];
      pb[c] += acc;
    }
  }
  for (int c = 0; c < co; ++c) {
    const double* gplane = pg + static_cast<std::size_t>(c) * oh * ow;
    for (int d = 0; d < ci; ++d) {
      const double* xin = px + static_cast<std::size_t>(d) * h * w;
      double* gxin = gx ? gx->data() + static_cast<std::size_t>(d) * h * w : nullptr;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const std::size_t kidx = ((static_cast<std::size_t>(c) * ci + d) * kh + ky) * kw + kx;
          const double wgt = pk[kidx];
          double wacc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xin + static_cast<std::size_t>(iy) * w;
            double* gxrow = gxin ? gxin + static_cast<std::size_t>(iy) * w : nullptr;
            const double* grow = gplane + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kx - padding;
              if (ix < 0 || ix >= w) continue;
              wacc += grow[ox] * xrow[ix];
              if (gxrow) gxrow[ix] += wgt * grow[ox];
            }
          }
          if (gkernel) gkernel->data()[kidx] += wacc;
        }
      }
    }
  }
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 1) throw DimensionError("linear: input must be a vector, got " + x.shape_str());
  if (w.ndim() != 2 || w.dim(1) != x.dim(0)) {
    throw DimensionError("linear: weight axis 1 must match input length " +
                         std::to_string(x.dim(0)) + ", got " + w.shape_str());
  }
  if (b.ndim() != 1 || b.dim(0) != w.dim(0)) {
    throw DimensionError("linear: bias axis 0 must have size " + std::to_string(w.dim(0)) +
                         ", got " + b.shape_str());
  }
  const int m = w.dim(0), n = w.dim(1);
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const double* row = w.data() + static_cast<std::size_t>(i) * n;
    double acc = b[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) acc += row[j] * x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx, Tensor* gw,
                     Tensor* gb) {
  const int m = w.dim(0), n = w.dim(1);
  for (int i = 0; i < m; ++i) {
    const double g = gout[static_cast<std::size_t>(i)];
    if (gb) (*gb)[static_cast<std::size_t>(i)] += g;
    const double* row = w.data() + static_cast<std::size_t>(i) * n;
    double* gwrow = gw ? gw->data() + static_cast<std::size_t>(i) * n : nullptr;
    for (int j = 0; j < n; ++j) {
      if (gx) (*gx)[static_cast<std::size_t>(j)] += g * row[j];
      if (gwrow) gwrow[j] += g * x[static_cast<std::size_t>(j)];
    }
  }
}

Tensor bilinear(const Tensor& a, const Tensor& m, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || m.ndim() != 2) {
    throw DimensionError("bilinear: expected vector, matrix, vector, got " + a.shape_str() + ", " +
                         m.shape_str() + ", " + b.shape_str());
  }
  if (m.dim(0) != a.dim(0)) {
    throw DimensionError("bilinear: matrix axis 0 is " + std::to_string(m.dim(0)) +
                         " but left vector has length " + std::to_string(a.dim(0)));
  }
  if (m.dim(1) != b.dim(0)) {
    throw DimensionError("bilinear: matrix axis 1 is " + std::to_string(m.dim(1)) +
                         " but right vector has length " + std::to_string(b.dim(0)));
  }
  const int n = m.dim(0), p = m.dim(1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = m.data() + static_cast<std::size_t>(i) * p;
    double inner = 0.0;
    for (int j = 0; j < p; ++j) inner += row[j] * b[static_cast<std::size_t>(j)];
    acc += a[static_cast<std::size_t>(i)] * inner;
  }
  return Tensor::scalar(acc);
}

void bilinear_backward(const Tensor& a, const Tensor& m, const Tensor& b, double gout, Tensor* ga,
                       Tensor* gm, Tensor* gb) {
  const int n = m.dim(0), p = m.dim(1);
  for (int i = 0; i < n; ++i) {
    const double* row = m.data() + static_cast<std::size_t>(i) * p;
    double* gmrow = gm ? gm->data() + static_cast<std::size_t>(i) * p : nullptr;
    double inner = 0.0;
    for (int j = 0; j < p; ++j) {
      inner += row[j] * b[static_cast<std::size_t>(j)];
      if (gmrow) gmrow[j] += gout * a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
      if (gb) (*gb)[static_cast<std::size_t>(j)] += gout * a[static_cast<std::size_t>(i)] * row[j];
    }
    if (ga) (*ga)[static_cast<std::size_t>(i)] += gout * inner;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw DimensionError("matmul: operands must be matrices, got " + a.shape_str() + " and " +
                         b.shape_str());
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: contraction axes differ, a axis 1 = " + std::to_string(a.dim(1)) +
                         ", b axis 0 = " + std::to_string(b.dim(0)));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    double* orow = out.data() + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor* ga, Tensor* gb) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  for (int i = 0; i < m; ++i) {
    const double* grow = gout.data() + static_cast<std::size_t>(i) * n;
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    double* garow = ga ? ga->data() + static_cast<std::size_t>(i) * k : nullptr;
    for (int l = 0; l < k; ++l) {
      const double* brow = b.data() + static_cast<std::size_t>(l) * n;
      double* gbrow = gb ? gb->data() + static_cast<std::size_t>(l) * n : nullptr;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += grow[j] * brow[j];
        if (gbrow) gbrow[j] += arow[l] * grow[j];
      }
      if (garow) garow[l] += acc;
    }
  }
}

Tensor axis_scale(const Tensor& x, const Tensor& s, int axis) {
  const AxisSpan sp = axis_span(x, axis, "axis_scale");
  if (s.ndim() != 1 || static_cast<std::size_t>(s.dim(0)) != sp.extent) {
    throw DimensionError("axis_scale: scale length must match axis " + std::to_string(axis) +
                         " extent " + std::to_string(sp.extent) + ", got " + s.shape_str());
  }
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  std::size_t idx = 0;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.extent; ++j) {
      const double c = s[j];
      for (std::size_t i = 0; i < sp.inner; ++i, ++idx) po[idx] = c * px[idx];
    }
  }
  return out;
}

void axis_scale_backward(const Tensor& x, const Tensor& s, int axis, const Tensor& gout, Tensor* gx,
                         Tensor* gs) {
  const AxisSpan sp = axis_span(x, axis, "axis_scale");
  const double* px = x.data();
  const double* pg = gout.data();
  std::size_t idx = 0;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.extent; ++j) {
      const double c = s[j];
      double acc = 0.0;
      for (std::size_t i = 0; i < sp.inner; ++i, ++idx) {
        if (gx) (*gx)[idx] += c * pg[idx];
        acc += px[idx] * pg[idx];
      }
      if (gs) (*gs)[j] += acc;
    }
  }
}

Tensor outer_sum(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1) {
    throw DimensionError("outer_sum: operands must be vectors, got " + a.shape_str() + " and " +
                         b.shape_str());
  }
  const int m = a.dim(0), n = b.dim(0);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double* row = out.data() + static_cast<std::size_t>(i) * n;
    const double av = a[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) row[j] = av + b[static_cast<std::size_t>(j)];
  }
  return out;
}

void outer_sum_backward(const Tensor& gout, Tensor* ga, Tensor* gb) {
  const int m = gout.dim(0), n = gout.dim(1);
  for (int i = 0; i < m; ++i) {
    const double* row = gout.data() + static_cast<std::size_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      acc += row[j];
      if (gb) (*gb)[static_cast<std::size_t>(j)] += row[j];
    }
    if (ga) (*ga)[static_cast<std::size_t>(i)] += acc;
  }
}

Tensor concat_cols(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const int v = parts[0]->dim(0);
  int total = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p]->ndim() != 2 || parts[p]->dim(0) != v) {
      throw DimensionError("concat_cols: operand " + std::to_string(p) + " row axis 0 must be " +
                           std::to_string(v) + ", got " + parts[p]->shape_str());
    }
    total += parts[p]->dim(1);
  }
  Tensor out({v, total});
  for (int i = 0; i < v; ++i) {
    double* row = out.data() + static_cast<std::size_t>(i) * total;
    int off = 0;
    for (const Tensor* part : parts) {
      const int d = part->dim(1);
      const double* src = part->data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) row[off + j] = src[j];
      off += d;
    }
  }
  return out;
}

Tensor stack_rows(const std::vector<const Tensor*>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no operands");
  const int n = rows[0]->dim(0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r]->ndim() != 1 || rows[r]->dim(0) != n) {
      throw DimensionError("stack_rows: operand " + std::to_string(r) + " must be a vector of " +
                           std::to_string(n) + ", got " + rows[r]->shape_str());
    }
  }
  Tensor out({static_cast<int>(rows.size()), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double* dst = out.data() + r * static_cast<std::size_t>(n);
    const double* src = rows[r]->data();
    for (int j = 0; j < n; ++j) dst[j] = src[j];
  }
  return out;
}

Tensor avg_pool(const Tensor& x, int grid) {
  if (x.ndim() != 3) throw DimensionError("avg_pool: input must be [c,h,w], got " + x.shape_str());
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (grid < 1 || h % grid != 0 || w % grid != 0) {
    throw DimensionError("avg_pool: grid " + std::to_string(grid) +
                         " must divide spatial axes of " + x.shape_str());
  }
  const int ch = h / grid, cw = w / grid;
  const double inv = 1.0 / (static_cast<double>(ch) * cw);
  Tensor out({c, grid, grid});
  for (int d = 0; d < c; ++d) {
    const double* plane = x.data() + static_cast<std::size_t>(d) * h * w;
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        double acc = 0.0;
        for (int y = gy * ch; y < (gy + 1) * ch; ++y) {
          const double* row = plane + static_cast<std::size_t>(y) * w;
          for (int xx = gx * cw; xx < (gx + 1) * cw; ++xx) acc += row[xx];
        }
        out[(static_cast<std::size_t>(d) * grid + gy) * grid + gx] = acc * inv;
      }
    }
  }
  return out;
}

void avg_pool_backward(const Tensor& x, int grid, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ch = h / grid, cw = w / grid;
  const double inv = 1.0 / (static_cast<double>(ch) * cw);
  for (int d = 0; d < c; ++d) {
    double* gplane = gx->data() + static_cast<std::size_t>(d) * h * w;
    for (int gy = 0; gy < grid; ++gy) {
      for (int gxx = 0; gxx < grid; ++gxx) {
        const double g = gout[(static_cast<std::size_t>(d) * grid + gy) * grid + gxx] * inv;
        for (int y = gy * ch; y < (gy + 1) * ch; ++y) {
          double* row = gplane + static_cast<std::size_t>(y) * w;
          for (int xx = gxx * cw; xx < (gxx + 1) * cw; ++xx) row[xx] += g;
        }
      }
    }
  }
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  Tensor out(std::move(shape));
  if (out.numel() != x.numel()) {
    throw DimensionError("reshape: cannot view " + x.shape_str() + " as " + out.shape_str());
  }
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i];
  return out;
}

Tensor mean_all(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
  return Tensor::scalar(acc / static_cast<double>(x.numel()));
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
  return Tensor::scalar(acc);
}

namespace {

std::vector<int> shape_without_axis(const Tensor& x, int axis) {
  std::vector<int> shape;
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != axis) shape.push_back(x.dim(i));
  }
  if (shape.empty()) shape.push_back(1);
  return shape;
}

}  // namespace

Tensor mean_axis(const Tensor& x, int axis) {
  const AxisSpan sp = axis_span(x, axis, "mean_axis");
  Tensor out(shape_without_axis(x, axis));
  const double inv = 1.0 / static_cast<double>(sp.extent);
  const double* px = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < sp.extent; ++j) acc += px[(o * sp.extent + j) * sp.inner + i];
      out[o * sp.inner + i] = acc * inv;
    }
  }
  return out;
}

void mean_axis_backward(const Tensor& x, int axis, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const AxisSpan sp = axis_span(x, axis, "mean_axis");
  const double inv = 1.0 / static_cast<double>(sp.extent);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const double g = gout[o * sp.inner + i] * inv;
      for (std::size_t j = 0; j < sp.extent; ++j) {
        (*gx)[(o * sp.extent + j) * sp.inner + i] += g;
      }
    }
  }
}

Tensor softmax_axis(const Tensor& x, int axis) {
  const AxisSpan sp = axis_span(x, axis, "softmax_axis");
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double mx = -HUGE_VAL;
      for (std::size_t j = 0; j < sp.extent; ++j) {
        mx = std::max(mx, px[(o * sp.extent + j) * sp.inner + i]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < sp.extent; ++j) {
        const std::size_t idx = (o * sp.extent + j) * sp.inner + i;
        po[idx] = std::exp(px[idx] - mx);
        denom += po[idx];
      }
      for (std::size_t j = 0; j < sp.extent; ++j) po[(o * sp.extent + j) * sp.inner + i] /= denom;
    }
  }
  return out;
}

void softmax_axis_backward(const Tensor& y, int axis, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const AxisSpan sp = axis_span(y, axis, "softmax_axis");
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < sp.extent; ++j) {
        const std::size_t idx = (o * sp.extent + j) * sp.inner + i;
        dot += gout[idx] * y[idx];
      }
      for (std::size_t j = 0; j < sp.extent; ++j) {
        const std::size_t idx = (o * sp.extent + j) * sp.inner + i;
        (*gx)[idx] += y[idx] * (gout[idx] - dot);
      }
    }
  }
}

}  // namespace rmat::ops
