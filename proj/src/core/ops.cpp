#include "dctnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "blas.hpp"
#include "dctnet/error.hpp"

namespace dctnet::ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void require_rank(const Tensor& x, int rank, const char* op) {
    if (x.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(x.shape()));
    }
}

struct Dims4 {
    int b, c, h, w;
    int plane() const { return h * w; }
};

Dims4 dims4(const Tensor& x, const char* op) {
    require_rank(x, 4, op);
    return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

void accumulate(Tensor& into, std::span<const double> g) {
    auto dst = into.grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

// Maps a unary elementwise op with derivative expressed in terms of input
// and output values.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, std::string_view name, Fwd fwd, Deriv deriv) {
    auto xs = x.data();
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
    Tensor y = make_result(x.shape(), std::move(out));
    if (should_record({&x})) {
        active_tape()->record(name, {x}, y, [deriv](Tape::Record& r) {
            auto g = r.output.grad();
            auto in = r.inputs[0].data();
            auto o = r.output.data();
            auto gx = r.inputs[0].grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(in[i], o[i]);
        });
    }
    return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto as = a.data();
    auto bs = b.data();
    std::vector<double> out(as.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] + bs[i];
    Tensor y = make_result(a.shape(), std::move(out));
    if (should_record({&a, &b})) {
        active_tape()->record("add", {a, b}, y, [](Tape::Record& r) {
            auto g = r.output.grad();
            for (auto& in : r.inputs)
                if (in.requires_grad()) accumulate(in, g);
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto as = a.data();
    auto bs = b.data();
    std::vector<double> out(as.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] - bs[i];
    Tensor y = make_result(a.shape(), std::move(out));
    if (should_record({&a, &b})) {
        active_tape()->record("sub", {a, b}, y, [](Tape::Record& r) {
            auto g = r.output.grad();
            if (r.inputs[0].requires_grad()) accumulate(r.inputs[0], g);
            if (r.inputs[1].requires_grad()) {
                auto gb = r.inputs[1].grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto as = a.data();
    auto bs = b.data();
    std::vector<double> out(as.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] * bs[i];
    Tensor y = make_result(a.shape(), std::move(out));
    if (should_record({&a, &b})) {
        active_tape()->record("mul", {a, b}, y, [](Tape::Record& r) {
            auto g = r.output.grad();
            auto av = r.inputs[0].data();
            auto bv = r.inputs[1].data();
            if (r.inputs[0].requires_grad()) {
                auto ga = r.inputs[0].grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
            }
            if (r.inputs[1].requires_grad()) {
                auto gb = r.inputs[1].grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
            }
        });
    }
    return y;
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, "relu", [](double v) { return v > 0.0 || std::isnan(v) ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double out) { return out * (1.0 - out); });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor y = Tensor::scalar(s);
    if (should_record({&x})) {
        active_tape()->record("sum", {x}, y, [](Tape::Record& r) {
            const double g = r.output.grad()[0];
            for (double& gx : r.inputs[0].grad()) gx += g;
        });
    }
    return y;
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const bool batched = a.rank() == 3;
    if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3)) ||
        a.dim(-1) != b.dim(-2) || (batched && a.dim(0) != b.dim(0))) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const int batch = batched ? a.dim(0) : 1;
    const int m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
    std::vector<double> out(static_cast<std::size_t>(batch) * m * n, 0.0);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    if (k > 0) {
        for (int i = 0; i < batch; ++i) {
            detail::gemm(false, false, m, n, k, 1.0, ad + std::size_t(i) * m * k, k, bd + std::size_t(i) * k * n, n,
                         0.0, out.data() + std::size_t(i) * m * n, n);
        }
    }
    Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
    Tensor y = make_result(std::move(shape), std::move(out));
    if (should_record({&a, &b})) {
        active_tape()->record("matmul", {a, b}, y, [batch, m, n, k](Tape::Record& r) {
            if (k == 0) return;
            const double* g = r.output.grad().data();
            const double* av = r.inputs[0].data().data();
            const double* bv = r.inputs[1].data().data();
            for (int i = 0; i < batch; ++i) {
                const double* gi = g + std::size_t(i) * m * n;
                if (r.inputs[0].requires_grad()) {
                    // dA = dY B^T
                    detail::gemm(false, true, m, k, n, 1.0, gi, n, bv + std::size_t(i) * k * n, n, 1.0,
                                 r.inputs[0].grad().data() + std::size_t(i) * m * k, k);
                }
                if (r.inputs[1].requires_grad()) {
                    // dB = A^T dY
                    detail::gemm(true, false, k, n, m, 1.0, av + std::size_t(i) * m * k, k, gi, n, 1.0,
                                 r.inputs[1].grad().data() + std::size_t(i) * k * n, n);
                }
            }
        });
    }
    return y;
}

namespace {
void transpose_block(const double* src, double* dst, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) dst[std::size_t(j) * rows + i] = src[std::size_t(i) * cols + j];
}
void transpose_block_add(const double* src, double* dst, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) dst[std::size_t(j) * rows + i] += src[std::size_t(i) * cols + j];
}
}  // namespace

Tensor transpose_last2(const Tensor& x) {
    if (x.rank() != 2 && x.rank() != 3) throw DimensionError("transpose_last2: rank must be 2 or 3, got " + shape_str(x.shape()));
    const int batch = x.rank() == 3 ? x.dim(0) : 1;
    const int rows = x.dim(-2), cols = x.dim(-1);
    std::vector<double> out(x.numel());
    const std::size_t block = std::size_t(rows) * cols;
    for (int i = 0; i < batch; ++i) transpose_block(x.data().data() + i * block, out.data() + i * block, rows, cols);
    Shape shape = x.shape();
    std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
    Tensor y = make_result(std::move(shape), std::move(out));
    if (should_record({&x})) {
        active_tape()->record("transpose", {x}, y, [batch, rows, cols, block](Tape::Record& r) {
            const double* g = r.output.grad().data();
            double* gx = r.inputs[0].grad().data();
            for (int i = 0; i < batch; ++i) transpose_block_add(g + i * block, gx + i * block, cols, rows);
        });
    }
    return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    auto xs = x.data();
    Tensor y = make_result(std::move(shape), std::vector<double>(xs.begin(), xs.end()));
    if (should_record({&x})) {
        active_tape()->record("reshape", {x}, y, [](Tape::Record& r) { accumulate(r.inputs[0], r.output.grad()); });
    }
    return y;
}

// ---------------------------------------------------------------------------

int conv_out_extent(int in, int kernel, const Conv2dParams& p) {
    return (in + 2 * p.padding - p.dilation * (kernel - 1) - 1) / p.stride + 1;
}

namespace {

struct ConvGeometry {
    int c, h, w, k, oh, ow;
    Conv2dParams p;
    bool pointwise() const { return k == 1 && p.stride == 1 && p.padding == 0; }
    int col_rows() const { return c * k * k; }
    int col_cols() const { return oh * ow; }
};

void im2col(const double* x, double* col, const ConvGeometry& g) {
    std::size_t row = 0;
    for (int c = 0; c < g.c; ++c) {
        const double* plane = x + std::size_t(c) * g.h * g.w;
        for (int ki = 0; ki < g.k; ++ki) {
            for (int kj = 0; kj < g.k; ++kj, ++row) {
                double* dst = col + row * g.col_cols();
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.p.stride - g.p.padding + ki * g.p.dilation;
                    double* drow = dst + std::size_t(oy) * g.ow;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(drow, drow + g.ow, 0.0);
                        continue;
                    }
                    const double* srow = plane + std::size_t(iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.p.stride - g.p.padding + kj * g.p.dilation;
                        drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, double* x, const ConvGeometry& g) {
    std::size_t row = 0;
    for (int c = 0; c < g.c; ++c) {
        double* plane = x + std::size_t(c) * g.h * g.w;
        for (int ki = 0; ki < g.k; ++ki) {
            for (int kj = 0; kj < g.k; ++kj, ++row) {
                const double* src = col + row * g.col_cols();
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.p.stride - g.p.padding + ki * g.p.dilation;
                    if (iy < 0 || iy >= g.h) continue;
                    const double* srow = src + std::size_t(oy) * g.ow;
                    double* drow = plane + std::size_t(iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.p.stride - g.p.padding + kj * g.p.dilation;
                        if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dParams& params) {
    const Dims4 d = dims4(x, "conv2d");
    require_rank(weight, 4, "conv2d weight");
    const int out_ch = weight.dim(0);
    const int k = weight.dim(2);
    if (weight.dim(1) != d.c || weight.dim(3) != k) {
        throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                             shape_str(x.shape()));
    }
    if (k < 1 || params.stride < 1 || params.dilation < 1 || params.padding < 0) {
        throw DimensionError("conv2d: invalid kernel/stride/dilation/padding");
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_ch)) {
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                             std::to_string(out_ch) + " output channels");
    }
    const int oh = conv_out_extent(d.h, k, params);
    const int ow = conv_out_extent(d.w, k, params);
    const int span_h = d.h + 2 * params.padding - params.dilation * (k - 1) - 1;
    const int span_w = d.w + 2 * params.padding - params.dilation * (k - 1) - 1;
    if (span_h < 0 || span_w < 0 || oh < 1 || ow < 1) {
        throw DimensionError("conv2d: non-positive output extent for input " + shape_str(x.shape()) + " and kernel " +
                             shape_str(weight.shape()));
    }
    const ConvGeometry geo{d.c, d.h, d.w, k, oh, ow, params};
    const int rows = geo.col_rows(), cols = geo.col_cols();
    std::vector<double> out(std::size_t(d.b) * out_ch * cols, 0.0);
    std::vector<double> col(geo.pointwise() ? 0 : std::size_t(rows) * cols);
    const double* xd = x.data().data();
    const double* wd = weight.data().data();
    for (int b = 0; b < d.b; ++b) {
        const double* xb = xd + std::size_t(b) * d.c * d.plane();
        const double* src = xb;
        if (!geo.pointwise()) {
            im2col(xb, col.data(), geo);
            src = col.data();
        }
        double* ob = out.data() + std::size_t(b) * out_ch * cols;
        detail::gemm(false, false, out_ch, cols, rows, 1.0, wd, rows, src, cols, 0.0, ob, cols);
        if (bias.defined()) {
            auto bs = bias.data();
            for (int o = 0; o < out_ch; ++o)
                for (int i = 0; i < cols; ++i) ob[std::size_t(o) * cols + i] += bs[o];
        }
    }
    Tensor y = make_result({d.b, out_ch, oh, ow}, std::move(out));
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    if (should_record(inputs)) {
        active_tape()->record("conv2d", std::move(inputs), y, [geo, d, out_ch](Tape::Record& r) {
            Tensor& xin = r.inputs[0];
            Tensor& win = r.inputs[1];
            const int rows = geo.col_rows(), cols = geo.col_cols();
            const double* g = r.output.grad().data();
            const double* xv = xin.data().data();
            const double* wv = win.data().data();
            std::vector<double> col(geo.pointwise() ? 0 : std::size_t(rows) * cols);
            std::vector<double> dcol(std::size_t(rows) * cols);
            for (int b = 0; b < d.b; ++b) {
                const double* gb = g + std::size_t(b) * out_ch * cols;
                if (win.requires_grad()) {
                    const double* xb = xv + std::size_t(b) * d.c * d.plane();
                    const double* src = xb;
                    if (!geo.pointwise()) {
                        im2col(xb, col.data(), geo);
                        src = col.data();
                    }
                    detail::gemm(false, true, out_ch, rows, cols, 1.0, gb, cols, src, cols, 1.0, win.grad().data(),
                                 rows);
                }
                if (xin.requires_grad()) {
                    double* gxb = xin.grad().data() + std::size_t(b) * d.c * d.plane();
                    if (geo.pointwise()) {
                        detail::gemm(true, false, rows, cols, out_ch, 1.0, wv, rows, gb, cols, 1.0, gxb, cols);
                    } else {
                        detail::gemm(true, false, rows, cols, out_ch, 1.0, wv, rows, gb, cols, 0.0, dcol.data(), cols);
                        col2im_add(dcol.data(), gxb, geo);
                    }
                }
                if (r.inputs.size() > 2 && r.inputs[2].requires_grad()) {
                    auto gbias = r.inputs[2].grad();
                    for (int o = 0; o < out_ch; ++o) {
                        double s = 0.0;
                        for (int i = 0; i < cols; ++i) s += gb[std::size_t(o) * cols + i];
                        gbias[o] += s;
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats, Mode mode,
                   double eps, double momentum) {
    const Dims4 d = dims4(x, "batchnorm2d");
    if (gamma.numel() != std::size_t(d.c) || beta.numel() != std::size_t(d.c) || stats.mean.size() != std::size_t(d.c) ||
        stats.var.size() != std::size_t(d.c)) {
        throw DimensionError("batchnorm2d: parameters do not match " + std::to_string(d.c) + " channels of " +
                             shape_str(x.shape()));
    }
    const std::size_t count = std::size_t(d.b) * d.plane();
    if (mode == Mode::Train && count < 2) {
        throw ContractError("batchnorm2d: train mode needs at least 2 values per channel, got input " +
                            shape_str(x.shape()));
    }
    const double* xv = x.data().data();
    auto gv = gamma.data();
    auto bv = beta.data();
    std::vector<double> mu(d.c), inv_std(d.c);
    for (int c = 0; c < d.c; ++c) {
        if (mode == Mode::Train) {
            double s = 0.0;
            for (int b = 0; b < d.b; ++b) {
                const double* p = xv + (std::size_t(b) * d.c + c) * d.plane();
                for (int i = 0; i < d.plane(); ++i) s += p[i];
            }
            const double m = s / double(count);
            double v = 0.0;
            for (int b = 0; b < d.b; ++b) {
                const double* p = xv + (std::size_t(b) * d.c + c) * d.plane();
                for (int i = 0; i < d.plane(); ++i) v += (p[i] - m) * (p[i] - m);
            }
            const double biased = v / double(count);
            mu[c] = m;
            inv_std[c] = 1.0 / std::sqrt(biased + eps);
            stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * m;
            stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * (v / double(count - 1));
        } else {
            mu[c] = stats.mean[c];
            inv_std[c] = 1.0 / std::sqrt(stats.var[c] + eps);
        }
    }
    std::vector<double> xhat(x.numel()), out(x.numel());
    for (int b = 0; b < d.b; ++b) {
        for (int c = 0; c < d.c; ++c) {
            const std::size_t off = (std::size_t(b) * d.c + c) * d.plane();
            for (int i = 0; i < d.plane(); ++i) {
                const double h = (xv[off + i] - mu[c]) * inv_std[c];
                xhat[off + i] = h;
                out[off + i] = gv[c] * h + bv[c];
            }
        }
    }
    Tensor y = make_result(x.shape(), std::move(out));
    if (should_record({&x, &gamma, &beta})) {
        active_tape()->record("batchnorm2d", {x, gamma, beta}, y,
                              [d, count, mode, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape::Record& r) {
                                  const double* g = r.output.grad().data();
                                  auto gam = r.inputs[1].data();
                                  for (int c = 0; c < d.c; ++c) {
                                      double sum_g = 0.0, sum_gh = 0.0;
                                      for (int b = 0; b < d.b; ++b) {
                                          const std::size_t off = (std::size_t(b) * d.c + c) * d.plane();
                                          for (int i = 0; i < d.plane(); ++i) {
                                              sum_g += g[off + i];
                                              sum_gh += g[off + i] * xhat[off + i];
                                          }
                                      }
                                      if (r.inputs[1].requires_grad()) r.inputs[1].grad()[c] += sum_gh;
                                      if (r.inputs[2].requires_grad()) r.inputs[2].grad()[c] += sum_g;
                                      if (!r.inputs[0].requires_grad()) continue;
                                      double* gx = r.inputs[0].grad().data();
                                      const double scale = gam[c] * inv_std[c];
                                      for (int b = 0; b < d.b; ++b) {
                                          const std::size_t off = (std::size_t(b) * d.c + c) * d.plane();
                                          for (int i = 0; i < d.plane(); ++i) {
                                              if (mode == Mode::Train) {
                                                  const double n = double(count);
                                                  gx[off + i] += scale * (g[off + i] - sum_g / n -
                                                                          xhat[off + i] * sum_gh / n);
                                              } else {
                                                  gx[off + i] += scale * g[off + i];
                                              }
                                          }
                                      }
                                  }
                              });
    }
    return y;
}

// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() < 1) throw DimensionError("softmax_rows: scalar input");
    const int cols = x.dim(-1);
    const std::size_t rows = cols == 0 ? 0 : x.numel() / cols;
    auto xs = x.data();
    std::vector<double> out(xs.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = xs.data() + r * cols;
        double* dst = out.data() + r * cols;
        const double mx = *std::max_element(src, src + cols);
        double s = 0.0;
        for (int j = 0; j < cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            s += dst[j];
        }
        for (int j = 0; j < cols; ++j) dst[j] /= s;
    }
    Tensor y = make_result(x.shape(), std::move(out));
    if (should_record({&x})) {
        active_tape()->record("softmax_rows", {x}, y, [rows, cols](Tape::Record& r) {
            const double* g = r.output.grad().data();
            const double* o = r.output.data().data();
            double* gx = r.inputs[0].grad().data();
            for (std::size_t i = 0; i < rows; ++i) {
                const std::size_t off = i * cols;
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += g[off + j] * o[off + j];
                for (int j = 0; j < cols; ++j) gx[off + j] += o[off + j] * (g[off + j] - dot);
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_channels: no inputs");
    const Dims4 first = dims4(parts[0], "concat_channels");
    int total_c = 0;
    for (const auto& p : parts) {
        const Dims4 d = dims4(p, "concat_channels");
        if (d.b != first.b || d.h != first.h || d.w != first.w) {
            throw DimensionError("concat_channels: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                                 shape_str(p.shape()));
        }
        total_c += d.c;
    }
    const std::size_t plane = first.plane();
    std::vector<double> out(std::size_t(first.b) * total_c * plane);
    for (int b = 0; b < first.b; ++b) {
        std::size_t dst = std::size_t(b) * total_c * plane;
        for (const auto& p : parts) {
            const std::size_t n = std::size_t(p.dim(1)) * plane;
            auto src = p.data().subspan(std::size_t(b) * n, n);
            std::copy(src.begin(), src.end(), out.begin() + dst);
            dst += n;
        }
    }
    Tensor y = make_result({first.b, total_c, first.h, first.w}, std::move(out));
    if (should_record(parts)) {
        active_tape()->record("concat_channels", std::vector<Tensor>(parts.begin(), parts.end()), y,
                              [batch = first.b, total_c, plane](Tape::Record& r) {
                                  auto g = r.output.grad();
                                  for (int b = 0; b < batch; ++b) {
                                      std::size_t src = std::size_t(b) * total_c * plane;
                                      for (auto& p : r.inputs) {
                                          const std::size_t n = std::size_t(p.dim(1)) * plane;
                                          if (p.requires_grad()) {
                                              auto gp = p.grad().subspan(std::size_t(b) * n, n);
                                              for (std::size_t i = 0; i < n; ++i) gp[i] += g[src + i];
                                          }
                                          src += n;
                                      }
                                  }
                              });
    }
    return y;
}

Tensor concat_channels(std::initializer_list<Tensor> parts) {
    return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor global_avg_pool(const Tensor& x) {
    const Dims4 d = dims4(x, "global_avg_pool");
    const std::size_t plane = d.plane();
    auto xs = x.data();
    std::vector<double> out(std::size_t(d.b) * d.c);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < plane; ++j) s += xs[i * plane + j];
        out[i] = s / double(plane);
    }
    Tensor y = make_result({d.b, d.c}, std::move(out));
    if (should_record({&x})) {
        active_tape()->record("global_avg_pool", {x}, y, [plane](Tape::Record& r) {
            auto g = r.output.grad();
            auto gx = r.inputs[0].grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = g[i] / double(plane);
                for (std::size_t j = 0; j < plane; ++j) gx[i * plane + j] += v;
            }
        });
    }
    return y;
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
    const Dims4 d = dims4(x, "scale_channels");
    if (s.rank() != 2 || s.dim(0) != d.b || s.dim(1) != d.c) {
        throw DimensionError("scale_channels: scales " + shape_str(s.shape()) + " do not match " + shape_str(x.shape()));
    }
    const std::size_t plane = d.plane();
    auto xs = x.data();
    auto ss = s.data();
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < ss.size(); ++i)
        for (std::size_t j = 0; j < plane; ++j) out[i * plane + j] = ss[i] * xs[i * plane + j];
    Tensor y = make_result(x.shape(), std::move(out));
    if (should_record({&x, &s})) {
        active_tape()->record("scale_channels", {x, s}, y, [plane](Tape::Record& r) {
            auto g = r.output.grad();
            auto xv = r.inputs[0].data();
            auto sv = r.inputs[1].data();
            for (std::size_t i = 0; i < sv.size(); ++i) {
                if (r.inputs[0].requires_grad()) {
                    auto gx = r.inputs[0].grad();
                    for (std::size_t j = 0; j < plane; ++j) gx[i * plane + j] += g[i * plane + j] * sv[i];
                }
                if (r.inputs[1].requires_grad()) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < plane; ++j) acc += g[i * plane + j] * xv[i * plane + j];
                    r.inputs[1].grad()[i] += acc;
                }
            }
        });
    }
    return y;
}

Tensor expand_spatial(const Tensor& x, int height, int width) {
    require_rank(x, 2, "expand_spatial");
    if (height < 1 || width < 1) throw DimensionError("expand_spatial: non-positive target extent");
    const std::size_t plane = std::size_t(height) * width;
    auto xs = x.data();
    std::vector<double> out(xs.size() * plane);
    for (std::size_t i = 0; i < xs.size(); ++i) std::fill_n(out.begin() + i * plane, plane, xs[i]);
    Tensor y = make_result({x.dim(0), x.dim(1), height, width}, std::move(out));
    if (should_record({&x})) {
        active_tape()->record("expand_spatial", {x}, y, [plane](Tape::Record& r) {
            auto g = r.output.grad();
            auto gx = r.inputs[0].grad();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < plane; ++j) s += g[i * plane + j];
                gx[i] += s;
            }
        });
    }
    return y;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear weight");
    if (weight.dim(1) != x.dim(1) || (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(weight.shape()));
    }
    const int batch = x.dim(0), in = x.dim(1), out_f = weight.dim(0);
    std::vector<double> out(std::size_t(batch) * out_f, 0.0);
    if (in > 0) detail::gemm(false, true, batch, out_f, in, 1.0, x.data().data(), in, weight.data().data(), in, 0.0, out.data(), out_f);
    if (bias.defined()) {
        auto bs = bias.data();
        for (int b = 0; b < batch; ++b)
            for (int o = 0; o < out_f; ++o) out[std::size_t(b) * out_f + o] += bs[o];
    }
    Tensor y = make_result({batch, out_f}, std::move(out));
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    if (should_record(inputs)) {
        active_tape()->record("linear", std::move(inputs), y, [batch, in, out_f](Tape::Record& r) {
            const double* g = r.output.grad().data();
            if (in > 0 && r.inputs[0].requires_grad()) {
                detail::gemm(false, false, batch, in, out_f, 1.0, g, out_f, r.inputs[1].data().data(), in, 1.0,
                             r.inputs[0].grad().data(), in);
            }
            if (in > 0 && r.inputs[1].requires_grad()) {
                detail::gemm(true, false, out_f, in, batch, 1.0, g, out_f, r.inputs[0].data().data(), in, 1.0,
                             r.inputs[1].grad().data(), in);
            }
            if (r.inputs.size() > 2 && r.inputs[2].requires_grad()) {
                auto gb = r.inputs[2].grad();
                for (int b = 0; b < batch; ++b)
                    for (int o = 0; o < out_f; ++o) gb[o] += g[std::size_t(b) * out_f + o];
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------

namespace {
struct Tap {
    int i0, i1;
    double w0, w1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(out);
    const double ratio = double(in) / double(out);
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * ratio - 0.5;
        if (src < 0.0) src = 0.0;
        int i0 = static_cast<int>(src);
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = std::min(i0 + 1, in - 1);
        const double l1 = src - i0;
        taps[o] = {i0, i1, 1.0 - l1, l1};
    }
    return taps;
}
}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_height, int out_width) {
    const Dims4 d = dims4(x, "resize_bilinear");
    if (out_height < 1 || out_width < 1) throw DimensionError("resize_bilinear: non-positive target extent");
    auto ty = bilinear_taps(d.h, out_height);
    auto tx = bilinear_taps(d.w, out_width);
    const std::size_t in_plane = d.plane(), out_plane = std::size_t(out_height) * out_width;
    const std::size_t planes = std::size_t(d.b) * d.c;
    auto xs = x.data();
    std::vector<double> out(planes * out_plane);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = xs.data() + p * in_plane;
        double* dst = out.data() + p * out_plane;
        for (int oy = 0; oy < out_height; ++oy) {
            const Tap& a = ty[oy];
            const double* r0 = src + std::size_t(a.i0) * d.w;
            const double* r1 = src + std::size_t(a.i1) * d.w;
            for (int ox = 0; ox < out_width; ++ox) {
                const Tap& b = tx[ox];
                dst[std::size_t(oy) * out_width + ox] =
                    a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) + a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
            }
        }
    }
    Tensor y = make_result({d.b, d.c, out_height, out_width}, std::move(out));
    if (should_record({&x})) {
        active_tape()->record("resize_bilinear", {x}, y,
                              [ty = std::move(ty), tx = std::move(tx), planes, in_plane, out_plane, in_w = d.w,
                               out_height, out_width](Tape::Record& r) {
                                  const double* g = r.output.grad().data();
                                  double* gx = r.inputs[0].grad().data();
                                  for (std::size_t p = 0; p < planes; ++p) {
                                      const double* gp = g + p * out_plane;
                                      double* dst = gx + p * in_plane;
                                      for (int oy = 0; oy < out_height; ++oy) {
                                          const Tap& a = ty[oy];
                                          double* r0 = dst + std::size_t(a.i0) * in_w;
                                          double* r1 = dst + std::size_t(a.i1) * in_w;
                                          for (int ox = 0; ox < out_width; ++ox) {
                                              const Tap& b = tx[ox];
                                              const double v = gp[std::size_t(oy) * out_width + ox];
                                              r0[b.i0] += a.w0 * b.w0 * v;
                                              r0[b.i1] += a.w0 * b.w1 * v;
                                              r1[b.i0] += a.w1 * b.w0 * v;
                                              r1[b.i1] += a.w1 * b.w1 * v;
                                          }
                                      }
                                  }
                              });
    }
    return y;
}

Tensor upsample_bilinear_x2(const Tensor& x) {
    const Dims4 d = dims4(x, "upsample_bilinear_x2");
    return resize_bilinear(x, 2 * d.h, 2 * d.w);
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride) {
    const Dims4 d = dims4(x, "max_pool2d");
    if (kernel < 1 || stride < 1 || kernel > d.h || kernel > d.w) {
        throw DimensionError("max_pool2d: kernel " + std::to_string(kernel) + " invalid for " + shape_str(x.shape()));
    }
    const int oh = (d.h - kernel) / stride + 1, ow = (d.w - kernel) / stride + 1;
    const std::size_t planes = std::size_t(d.b) * d.c, in_plane = d.plane(), out_plane = std::size_t(oh) * ow;
    auto xs = x.data();
    std::vector<double> out(planes * out_plane);
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t p = 0; p < planes; ++p) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                std::size_t best = p * in_plane + std::size_t(oy * stride) * d.w + ox * stride;
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx) {
                        const std::size_t idx = p * in_plane + std::size_t(oy * stride + ky) * d.w + ox * stride + kx;
                        if (xs[idx] > xs[best] || std::isnan(xs[idx])) best = idx;
                    }
                const std::size_t o = p * out_plane + std::size_t(oy) * ow + ox;
                out[o] = xs[best];
                argmax[o] = best;
            }
        }
    }
    Tensor y = make_result({d.b, d.c, oh, ow}, std::move(out));
    if (should_record({&x})) {
        active_tape()->record("max_pool2d", {x}, y, [argmax = std::move(argmax)](Tape::Record& r) {
            auto g = r.output.grad();
            auto gx = r.inputs[0].grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------

Tensor bce_mean(const Tensor& p, const Tensor& g) {
    require_same_shape(p, g, "bce_mean");
    if (p.numel() == 0) throw DimensionError("bce_mean: empty input");
    constexpr double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
    auto ps = p.data();
    auto gs = g.data();
    double s = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double q = std::clamp(ps[i], lo, hi);
        s -= gs[i] * std::log(q) + (1.0 - gs[i]) * std::log(1.0 - q);
    }
    const double n = double(ps.size());
    Tensor y = Tensor::scalar(s / n);
    if (should_record({&p})) {
        active_tape()->record("bce_mean", {p, g}, y, [n, lo, hi](Tape::Record& r) {
            const double go = r.output.grad()[0];
            auto pv = r.inputs[0].data();
            auto gv = r.inputs[1].data();
            auto gp = r.inputs[0].grad();
            for (std::size_t i = 0; i < pv.size(); ++i) {
                const double q = pv[i];
                if (q < lo || q > hi) continue;
                gp[i] += go * (-(gv[i] / q) + (1.0 - gv[i]) / (1.0 - q)) / n;
            }
        });
    }
    return y;
}

Tensor iou_loss(const Tensor& p, const Tensor& g, double eps) {
    require_same_shape(p, g, "iou_loss");
    if (p.rank() < 1 || p.dim(0) == 0) throw DimensionError("iou_loss: empty batch");
    const int batch = p.dim(0);
    const std::size_t per = p.numel() / batch;
    auto ps = p.data();
    auto gs = g.data();
    std::vector<double> inter(batch), uni(batch);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        double i_sum = 0.0, p_sum = 0.0, g_sum = 0.0;
        for (std::size_t j = 0; j < per; ++j) {
            const double pv = ps[b * per + j], gv = gs[b * per + j];
            i_sum += pv * gv;
            p_sum += pv;
            g_sum += gv;
        }
        inter[b] = i_sum + eps;
        uni[b] = p_sum + g_sum - i_sum + eps;
        total += 1.0 - inter[b] / uni[b];
    }
    Tensor y = Tensor::scalar(total / batch);
    if (should_record({&p})) {
        active_tape()->record("iou_loss", {p, g}, y,
                              [batch, per, inter = std::move(inter), uni = std::move(uni)](Tape::Record& r) {
                                  const double go = r.output.grad()[0] / batch;
                                  auto gv = r.inputs[1].data();
                                  auto gp = r.inputs[0].grad();
                                  for (int b = 0; b < batch; ++b) {
                                      const double u2 = uni[b] * uni[b];
                                      for (std::size_t j = 0; j < per; ++j) {
                                          const double gt = gv[b * per + j];
                                          gp[b * per + j] -= go * (gt * uni[b] - inter[b] * (1.0 - gt)) / u2;
                                      }
                                  }
                              });
    }
    return y;
}

bool all_finite(const Tensor& x) {
    for (double v : x.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace dctnet::ops
