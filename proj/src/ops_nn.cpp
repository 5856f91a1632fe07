#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sadepth/ops.hpp"

namespace sadepth::ops {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct ConvDims {
    int64_t N, Cin, H, W;
    int64_t Cout, KH, KW;
    int64_t stride, pad, dil;
    int64_t OH, OW;
};

ConvDims conv_dims(const Var& x, const Var& w, int64_t stride, int64_t pad, int64_t dil) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4) throw std::invalid_argument("conv2d: inputs must be 4-D");
    if (xs[1] != ws[1]) {
        throw std::invalid_argument("conv2d: channel mismatch " + Tensor::shape_str(xs) + " vs " +
                                    Tensor::shape_str(ws));
    }
    ConvDims d;
    d.N = xs[0];
    d.Cin = xs[1];
    d.H = xs[2];
    d.W = xs[3];
    d.Cout = ws[0];
    d.KH = ws[2];
    d.KW = ws[3];
    d.stride = stride;
    d.pad = pad;
    d.dil = dil;
    d.OH = (d.H + 2 * pad - dil * (d.KH - 1) - 1) / stride + 1;
    d.OW = (d.W + 2 * pad - dil * (d.KW - 1) - 1) / stride + 1;
    if (d.OH <= 0 || d.OW <= 0) throw std::invalid_argument("conv2d: empty output");
    return d;
}

// col has (Cin*KH*KW) rows and (OH*OW) columns.
void im2col(const double* x, const ConvDims& d, double* col) {
    const int64_t plane = d.H * d.W;
    for (int64_t c = 0; c < d.Cin; ++c) {
        for (int64_t kh = 0; kh < d.KH; ++kh) {
            for (int64_t kw = 0; kw < d.KW; ++kw) {
                double* row = col + ((c * d.KH + kh) * d.KW + kw) * (d.OH * d.OW);
                const double* src = x + c * plane;
                for (int64_t oh = 0; oh < d.OH; ++oh) {
                    const int64_t ih = oh * d.stride - d.pad + kh * d.dil;
                    if (ih < 0 || ih >= d.H) {
                        std::fill_n(row + oh * d.OW, d.OW, 0.0);
                        continue;
                    }
                    for (int64_t ow = 0; ow < d.OW; ++ow) {
                        const int64_t iw = ow * d.stride - d.pad + kw * d.dil;
                        row[oh * d.OW + ow] = (iw >= 0 && iw < d.W) ? src[ih * d.W + iw] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_accum(const double* col, const ConvDims& d, double* gx) {
    const int64_t plane = d.H * d.W;
    for (int64_t c = 0; c < d.Cin; ++c) {
        for (int64_t kh = 0; kh < d.KH; ++kh) {
            for (int64_t kw = 0; kw < d.KW; ++kw) {
                const double* row = col + ((c * d.KH + kh) * d.KW + kw) * (d.OH * d.OW);
                double* dst = gx + c * plane;
                for (int64_t oh = 0; oh < d.OH; ++oh) {
                    const int64_t ih = oh * d.stride - d.pad + kh * d.dil;
                    if (ih < 0 || ih >= d.H) continue;
                    for (int64_t ow = 0; ow < d.OW; ++ow) {
                        const int64_t iw = ow * d.stride - d.pad + kw * d.dil;
                        if (iw >= 0 && iw < d.W) dst[ih * d.W + iw] += row[oh * d.OW + ow];
                    }
                }
            }
        }
    }
}

int64_t reflect_index(int64_t i, int64_t n) {
    if (n == 1) return 0;
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

} // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, int64_t stride, int64_t pad, int64_t dilation) {
    const ConvDims d = conv_dims(x, w, stride, pad, dilation);
    const int64_t K = d.Cin * d.KH * d.KW;
    const int64_t P = d.OH * d.OW;
    Tensor out({d.N, d.Cout, d.OH, d.OW});
    std::vector<double> col(static_cast<size_t>(K * P));
    for (int64_t n = 0; n < d.N; ++n) {
        im2col(x.value().data() + n * d.Cin * d.H * d.W, d, col.data());
        ConstMatMap W(w.value().data(), d.Cout, K);
        ConstMatMap C(col.data(), K, P);
        MatMap O(out.data() + n * d.Cout * P, d.Cout, P);
        O.noalias() = W * C;
    }
    if (bias.defined()) {
        if (bias.numel() != d.Cout) throw std::invalid_argument("conv2d: bias size mismatch");
        double* po = out.data();
        const double* pb = bias.value().data();
        for (int64_t n = 0; n < d.N; ++n)
            for (int64_t c = 0; c < d.Cout; ++c) {
                const double b = pb[c];
                double* row = po + (n * d.Cout + c) * P;
                for (int64_t i = 0; i < P; ++i) row[i] += b;
            }
    }
    std::vector<Var> inputs = {x, w};
    if (bias.defined()) inputs.push_back(bias);
    return Var::make_op(std::move(out), std::move(inputs), [x, w, bias, d, K, P](detail::Node& node) {
        std::vector<double> col(static_cast<size_t>(K * P));
        std::vector<double> dcol(static_cast<size_t>(K * P));
        for (int64_t n = 0; n < d.N; ++n) {
            ConstMatMap G(node.grad.data() + n * d.Cout * P, d.Cout, P);
            if (w.requires_grad() || bias.defined()) {
                im2col(x.value().data() + n * d.Cin * d.H * d.W, d, col.data());
            }
            if (w.requires_grad()) {
                ConstMatMap C(col.data(), K, P);
                MatMap GW(w.grad().data(), d.Cout, K);
                GW.noalias() += G * C.transpose();
            }
            if (x.requires_grad()) {
                ConstMatMap W(w.value().data(), d.Cout, K);
                MatMap DC(dcol.data(), K, P);
                DC.noalias() = W.transpose() * G;
                col2im_accum(dcol.data(), d, x.grad().data() + n * d.Cin * d.H * d.W);
            }
            if (bias.defined() && bias.requires_grad()) {
                double* gb = bias.grad().data();
                const double* pg = node.grad.data() + n * d.Cout * P;
                for (int64_t c = 0; c < d.Cout; ++c) {
                    double s = 0;
                    for (int64_t i = 0; i < P; ++i) s += pg[c * P + i];
                    gb[c] += s;
                }
            }
        }
    });
}

Var maxpool2d(const Var& x, int64_t kernel, int64_t stride, int64_t pad) {
    const auto& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("maxpool2d: input must be 4-D");
    const int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const int64_t OH = (H + 2 * pad - kernel) / stride + 1;
    const int64_t OW = (W + 2 * pad - kernel) / stride + 1;
    Tensor out({N, C, OH, OW});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * OH * OW));
    const double* px = x.value().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* plane = px + nc * H * W;
        for (int64_t oh = 0; oh < OH; ++oh) {
            for (int64_t ow = 0; ow < OW; ++ow) {
                double best = -std::numeric_limits<double>::infinity();
                int64_t best_idx = -1;
                for (int64_t kh = 0; kh < kernel; ++kh) {
                    const int64_t ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    for (int64_t kw = 0; kw < kernel; ++kw) {
                        const int64_t iw = ow * stride - pad + kw;
                        if (iw < 0 || iw >= W) continue;
                        const double v = plane[ih * W + iw];
                        if (v > best) {
                            best = v;
                            best_idx = ih * W + iw;
                        }
                    }
                }
                po[nc * OH * OW + oh * OW + ow] = best;
                (*argmax)[static_cast<size_t>(nc * OH * OW + oh * OW + ow)] = best_idx;
            }
        }
    }
    return Var::make_op(std::move(out), {x}, [x, argmax, N, C, H, W, OH, OW](detail::Node& node) {
        if (!x.requires_grad()) return;
        const double* go = node.grad.data();
        double* gx = x.grad().data();
        for (int64_t nc = 0; nc < N * C; ++nc)
            for (int64_t o = 0; o < OH * OW; ++o) {
                const int64_t idx = (*argmax)[static_cast<size_t>(nc * OH * OW + o)];
                if (idx >= 0) gx[nc * H * W + idx] += go[nc * OH * OW + o];
            }
    });
}

Var upsample_nearest2x(const Var& x) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    Tensor out({N, C, H * 2, W * 2});
    const double* px = x.value().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc)
        for (int64_t h = 0; h < 2 * H; ++h)
            for (int64_t w = 0; w < 2 * W; ++w)
                po[nc * 4 * H * W + h * 2 * W + w] = px[nc * H * W + (h / 2) * W + (w / 2)];
    return Var::make_op(std::move(out), {x}, [x, N, C, H, W](detail::Node& node) {
        if (!x.requires_grad()) return;
        const double* go = node.grad.data();
        double* gx = x.grad().data();
        for (int64_t nc = 0; nc < N * C; ++nc)
            for (int64_t h = 0; h < 2 * H; ++h)
                for (int64_t w = 0; w < 2 * W; ++w)
                    gx[nc * H * W + (h / 2) * W + (w / 2)] += go[nc * 4 * H * W + h * 2 * W + w];
    });
}

Var resize_bilinear(const Var& x, int64_t out_h, int64_t out_w) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const double sh = static_cast<double>(H) / static_cast<double>(out_h);
    const double sw = static_cast<double>(W) / static_cast<double>(out_w);
    // Precompute per-row/column source indices and weights (half-pixel centers).
    std::vector<int64_t> y0(static_cast<size_t>(out_h)), y1(static_cast<size_t>(out_h));
    std::vector<double> wy(static_cast<size_t>(out_h));
    for (int64_t oy = 0; oy < out_h; ++oy) {
        double sy = (static_cast<double>(oy) + 0.5) * sh - 0.5;
        sy = std::min(std::max(sy, 0.0), static_cast<double>(H - 1));
        y0[oy] = static_cast<int64_t>(std::floor(sy));
        y1[oy] = std::min(y0[oy] + 1, H - 1);
        wy[oy] = sy - static_cast<double>(y0[oy]);
    }
    std::vector<int64_t> x0(static_cast<size_t>(out_w)), x1(static_cast<size_t>(out_w));
    std::vector<double> wx(static_cast<size_t>(out_w));
    for (int64_t ox = 0; ox < out_w; ++ox) {
        double sx = (static_cast<double>(ox) + 0.5) * sw - 0.5;
        sx = std::min(std::max(sx, 0.0), static_cast<double>(W - 1));
        x0[ox] = static_cast<int64_t>(std::floor(sx));
        x1[ox] = std::min(x0[ox] + 1, W - 1);
        wx[ox] = sx - static_cast<double>(x0[ox]);
    }
    Tensor out({N, C, out_h, out_w});
    const double* px = x.value().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* plane = px + nc * H * W;
        double* oplane = po + nc * out_h * out_w;
        for (int64_t oy = 0; oy < out_h; ++oy)
            for (int64_t ox = 0; ox < out_w; ++ox) {
                const double a = plane[y0[oy] * W + x0[ox]];
                const double b = plane[y0[oy] * W + x1[ox]];
                const double c = plane[y1[oy] * W + x0[ox]];
                const double d = plane[y1[oy] * W + x1[ox]];
                const double top = a + (b - a) * wx[ox];
                const double bot = c + (d - c) * wx[ox];
                oplane[oy * out_w + ox] = top + (bot - top) * wy[oy];
            }
    }
    return Var::make_op(std::move(out), {x}, [x, N, C, H, W, out_h, out_w, y0, y1, wy, x0, x1, wx](detail::Node& node) {
        if (!x.requires_grad()) return;
        const double* go = node.grad.data();
        double* gx = x.grad().data();
        for (int64_t nc = 0; nc < N * C; ++nc) {
            double* gplane = gx + nc * H * W;
            const double* oplane = go + nc * out_h * out_w;
            for (int64_t oy = 0; oy < out_h; ++oy)
                for (int64_t ox = 0; ox < out_w; ++ox) {
                    const double g = oplane[oy * out_w + ox];
                    const double wyv = wy[oy], wxv = wx[ox];
                    gplane[y0[oy] * W + x0[ox]] += g * (1 - wyv) * (1 - wxv);
                    gplane[y0[oy] * W + x1[ox]] += g * (1 - wyv) * wxv;
                    gplane[y1[oy] * W + x0[ox]] += g * wyv * (1 - wxv);
                    gplane[y1[oy] * W + x1[ox]] += g * wyv * wxv;
                }
        }
    });
}

Var box_filter3(const Var& x) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    Tensor out(xs);
    const double* px = x.value().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* plane = px + nc * H * W;
        double* oplane = po + nc * H * W;
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w) {
                double s = 0;
                for (int64_t dh = -1; dh <= 1; ++dh)
                    for (int64_t dw = -1; dw <= 1; ++dw)
                        s += plane[reflect_index(h + dh, H) * W + reflect_index(w + dw, W)];
                oplane[h * W + w] = s / 9.0;
            }
    }
    return Var::make_op(std::move(out), {x}, [x, N, C, H, W](detail::Node& node) {
        if (!x.requires_grad()) return;
        const double* go = node.grad.data();
        double* gx = x.grad().data();
        for (int64_t nc = 0; nc < N * C; ++nc) {
            double* gplane = gx + nc * H * W;
            const double* oplane = go + nc * H * W;
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    const double g = oplane[h * W + w] / 9.0;
                    for (int64_t dh = -1; dh <= 1; ++dh)
                        for (int64_t dw = -1; dw <= 1; ++dw)
                            gplane[reflect_index(h + dh, H) * W + reflect_index(w + dw, W)] += g;
                }
        }
    });
}

Var global_avg_pool(const Var& x) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    Tensor out({N, C});
    const double* px = x.value().data();
    double* po = out.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        double s = 0;
        for (int64_t i = 0; i < HW; ++i) s += px[nc * HW + i];
        po[nc] = s / static_cast<double>(HW);
    }
    return Var::make_op(std::move(out), {x}, [x, N, C, HW](detail::Node& node) {
        if (!x.requires_grad()) return;
        const double* go = node.grad.data();
        double* gx = x.grad().data();
        for (int64_t nc = 0; nc < N * C; ++nc) {
            const double g = go[nc] / static_cast<double>(HW);
            for (int64_t i = 0; i < HW; ++i) gx[nc * HW + i] += g;
        }
    });
}

Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                    double momentum, double eps) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    const int64_t m = N * HW;
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(C), 0.0);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(C), 0.0);
    const double* px = x.value().data();
    for (int64_t c = 0; c < C; ++c) {
        double s = 0;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t i = 0; i < HW; ++i) s += px[(n * C + c) * HW + i];
        (*mean)[c] = s / static_cast<double>(m);
    }
    for (int64_t c = 0; c < C; ++c) {
        double s = 0;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t i = 0; i < HW; ++i) {
                const double d = px[(n * C + c) * HW + i] - (*mean)[c];
                s += d * d;
            }
        const double var = s / static_cast<double>(m);
        (*inv_std)[c] = 1.0 / std::sqrt(var + eps);
        running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * (*mean)[c];
        const double var_unbiased = m > 1 ? s / static_cast<double>(m - 1) : var;
        running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var_unbiased;
    }
    Tensor out(xs);
    const double* pg = gamma.value().data();
    const double* pb = beta.value().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double mu = (*mean)[c], is = (*inv_std)[c], ga = pg[c], be = pb[c];
            const double* row = px + (n * C + c) * HW;
            double* orow = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) orow[i] = ga * (row[i] - mu) * is + be;
        }
    return Var::make_op(std::move(out), {x, gamma, beta}, [x, gamma, beta, mean, inv_std, N, C, HW,
                                                           m](detail::Node& node) {
        const double* px = x.value().data();
        const double* pg = gamma.value().data();
        const double* go = node.grad.data();
        // Per-channel sums of dy and dy*xhat.
        std::vector<double> sum_dy(static_cast<size_t>(C), 0.0), sum_dy_xhat(static_cast<size_t>(C), 0.0);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const double mu = (*mean)[c], is = (*inv_std)[c];
                const double* row = px + (n * C + c) * HW;
                const double* grow = go + (n * C + c) * HW;
                double sd = 0, sx = 0;
                for (int64_t i = 0; i < HW; ++i) {
                    sd += grow[i];
                    sx += grow[i] * (row[i] - mu) * is;
                }
                sum_dy[c] += sd;
                sum_dy_xhat[c] += sx;
            }
        if (gamma.requires_grad()) {
            double* gg = gamma.grad().data();
            for (int64_t c = 0; c < C; ++c) gg[c] += sum_dy_xhat[c];
        }
        if (beta.requires_grad()) {
            double* gb = beta.grad().data();
            for (int64_t c = 0; c < C; ++c) gb[c] += sum_dy[c];
        }
        if (x.requires_grad()) {
            double* gx = x.grad().data();
            const double inv_m = 1.0 / static_cast<double>(m);
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double mu = (*mean)[c], is = (*inv_std)[c], ga = pg[c];
                    const double* row = px + (n * C + c) * HW;
                    const double* grow = go + (n * C + c) * HW;
                    double* gxrow = gx + (n * C + c) * HW;
                    for (int64_t i = 0; i < HW; ++i) {
                        const double xhat = (row[i] - mu) * is;
                        gxrow[i] += ga * is * (grow[i] - sum_dy[c] * inv_m - xhat * sum_dy_xhat[c] * inv_m);
                    }
                }
        }
    });
}

Var batchnorm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                   const Tensor& running_var, double eps) {
    const auto& xs = x.shape();
    const int64_t N = xs[0], C = xs[1], HW = xs[2] * xs[3];
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(C));
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
        (*mean)[c] = running_mean[c];
        (*inv_std)[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
    Tensor out(xs);
    const double* px = x.value().data();
    const double* pg = gamma.value().data();
    const double* pb = beta.value().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double mu = (*mean)[c], is = (*inv_std)[c], ga = pg[c], be = pb[c];
            const double* row = px + (n * C + c) * HW;
            double* orow = po + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) orow[i] = ga * (row[i] - mu) * is + be;
        }
    return Var::make_op(std::move(out), {x, gamma, beta}, [x, gamma, beta, mean, inv_std, N, C, HW](detail::Node& node) {
        const double* px = x.value().data();
        const double* pg = gamma.value().data();
        const double* go = node.grad.data();
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const double mu = (*mean)[c], is = (*inv_std)[c], ga = pg[c];
                const double* row = px + (n * C + c) * HW;
                const double* grow = go + (n * C + c) * HW;
                if (x.requires_grad()) {
                    double* gxrow = x.grad().data() + (n * C + c) * HW;
                    for (int64_t i = 0; i < HW; ++i) gxrow[i] += grow[i] * ga * is;
                }
                if (gamma.requires_grad()) {
                    double s = 0;
                    for (int64_t i = 0; i < HW; ++i) s += grow[i] * (row[i] - mu) * is;
                    gamma.grad().data()[c] += s;
                }
                if (beta.requires_grad()) {
                    double s = 0;
                    for (int64_t i = 0; i < HW; ++i) s += grow[i];
                    beta.grad().data()[c] += s;
                }
            }
    });
}

Var grid_sample(const Var& image, const Var& grid) {
    const auto& is = image.shape();
    const auto& gs = grid.shape();
    if (is.size() != 4 || gs.size() != 4 || gs[3] != 2 || is[0] != gs[0]) {
        throw std::invalid_argument("grid_sample: image (N,C,H,W) and grid (N,Hg,Wg,2) required");
    }
    const int64_t N = is[0], C = is[1], H = is[2], W = is[3];
    const int64_t GH = gs[1], GW = gs[2];
    Tensor out({N, C, GH, GW});
    const double* pi = image.value().data();
    const double* pg = grid.value().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t gy = 0; gy < GH; ++gy)
            for (int64_t gx = 0; gx < GW; ++gx) {
                const int64_t gidx = ((n * GH + gy) * GW + gx) * 2;
                double u = pg[gidx], v = pg[gidx + 1];
                u = std::min(std::max(u, 0.0), static_cast<double>(W - 1));
                v = std::min(std::max(v, 0.0), static_cast<double>(H - 1));
                const int64_t u0 = static_cast<int64_t>(std::floor(u));
                const int64_t v0 = static_cast<int64_t>(std::floor(v));
                const int64_t u1 = std::min(u0 + 1, W - 1);
                const int64_t v1 = std::min(v0 + 1, H - 1);
                const double wu = u - static_cast<double>(u0);
                const double wv = v - static_cast<double>(v0);
                for (int64_t c = 0; c < C; ++c) {
                    const double* plane = pi + (n * C + c) * H * W;
                    const double a = plane[v0 * W + u0];
                    const double b = plane[v0 * W + u1];
                    const double cc = plane[v1 * W + u0];
                    const double dd = plane[v1 * W + u1];
                    po[((n * C + c) * GH + gy) * GW + gx] =
                        (1 - wv) * ((1 - wu) * a + wu * b) + wv * ((1 - wu) * cc + wu * dd);
                }
            }
    }
    return Var::make_op(std::move(out), {image, grid}, [image, grid, N, C, H, W, GH, GW](detail::Node& node) {
        const double* pi = image.value().data();
        const double* pg = grid.value().data();
        const double* go = node.grad.data();
        double* gi = image.requires_grad() ? image.grad().data() : nullptr;
        double* gg = grid.requires_grad() ? grid.grad().data() : nullptr;
        for (int64_t n = 0; n < N; ++n) {
            for (int64_t gy = 0; gy < GH; ++gy)
                for (int64_t gx = 0; gx < GW; ++gx) {
                    const int64_t gidx = ((n * GH + gy) * GW + gx) * 2;
                    const double u_raw = pg[gidx], v_raw = pg[gidx + 1];
                    const bool u_in = u_raw > 0.0 && u_raw < static_cast<double>(W - 1);
                    const bool v_in = v_raw > 0.0 && v_raw < static_cast<double>(H - 1);
                    const double u = std::min(std::max(u_raw, 0.0), static_cast<double>(W - 1));
                    const double v = std::min(std::max(v_raw, 0.0), static_cast<double>(H - 1));
                    const int64_t u0 = static_cast<int64_t>(std::floor(u));
                    const int64_t v0 = static_cast<int64_t>(std::floor(v));
                    const int64_t u1 = std::min(u0 + 1, W - 1);
                    const int64_t v1 = std::min(v0 + 1, H - 1);
                    const double wu = u - static_cast<double>(u0);
                    const double wv = v - static_cast<double>(v0);
                    double du = 0, dv = 0;
                    for (int64_t c = 0; c < C; ++c) {
                        const double g = go[((n * C + c) * GH + gy) * GW + gx];
                        if (g == 0.0) continue;
                        const double* plane = pi + (n * C + c) * H * W;
                        const double a = plane[v0 * W + u0];
                        const double b = plane[v0 * W + u1];
                        const double cc = plane[v1 * W + u0];
                        const double dd = plane[v1 * W + u1];
                        if (gi) {
                            double* gplane = gi + (n * C + c) * H * W;
                            gplane[v0 * W + u0] += g * (1 - wv) * (1 - wu);
                            gplane[v0 * W + u1] += g * (1 - wv) * wu;
                            gplane[v1 * W + u0] += g * wv * (1 - wu);
                            gplane[v1 * W + u1] += g * wv * wu;
                        }
                        du += g * ((1 - wv) * (b - a) + wv * (dd - cc));
                        dv += g * ((1 - wu) * (cc - a) + wu * (dd - b));
                    }
                    if (gg) {
                        if (u_in) gg[gidx] += du;
                        if (v_in) gg[gidx + 1] += dv;
                    }
                }
        }
    });
}

} // namespace sadepth::ops
