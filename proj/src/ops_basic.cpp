#include "sadepth/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sadepth::ops {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Strides for addressing `in_shape` while iterating `out_shape` (right
// aligned; zero stride on broadcast dimensions).
std::vector<int64_t> bcast_strides(const std::vector<int64_t>& in_shape, const std::vector<int64_t>& out_shape) {
    const size_t nd = out_shape.size();
    const size_t offset = nd - in_shape.size();
    std::vector<int64_t> natural(in_shape.size());
    int64_t acc = 1;
    for (size_t i = in_shape.size(); i-- > 0;) {
        natural[i] = acc;
        acc *= in_shape[i];
    }
    std::vector<int64_t> strides(nd, 0);
    for (size_t i = 0; i < in_shape.size(); ++i) {
        if (in_shape[i] == out_shape[offset + i]) {
            strides[offset + i] = natural[i];
        } else if (in_shape[i] == 1) {
            strides[offset + i] = 0;
        } else {
            throw std::invalid_argument("broadcast: incompatible shapes " + Tensor::shape_str(in_shape) + " vs " +
                                        Tensor::shape_str(out_shape));
        }
    }
    return strides;
}

// Odometer walk over out_shape addressing two broadcast inputs.
template <class F>
void bcast_iterate2(const std::vector<int64_t>& out_shape, const std::vector<int64_t>& sa,
                    const std::vector<int64_t>& sb, F&& f) {
    const int64_t total = Tensor::shape_numel(out_shape);
    const int nd = static_cast<int>(out_shape.size());
    if (nd == 0) {
        if (total == 1) f(0, 0, 0);
        return;
    }
    std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
    int64_t ao = 0, bo = 0;
    for (int64_t flat = 0; flat < total; ++flat) {
        f(flat, ao, bo);
        for (int d = nd - 1; d >= 0; --d) {
            ++idx[static_cast<size_t>(d)];
            ao += sa[static_cast<size_t>(d)];
            bo += sb[static_cast<size_t>(d)];
            if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
            ao -= sa[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
            bo -= sb[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
            idx[static_cast<size_t>(d)] = 0;
        }
    }
}

template <class F>
void bcast_iterate1(const std::vector<int64_t>& out_shape, const std::vector<int64_t>& sa, F&& f) {
    std::vector<int64_t> zero(out_shape.size(), 0);
    bcast_iterate2(out_shape, sa, zero, [&](int64_t o, int64_t a, int64_t) { f(o, a); });
}

bool same_shape(const Var& a, const Var& b) { return a.shape() == b.shape(); }

// Generic broadcasting binary op. FwdFn: double(double,double);
// BwdFn: void(av, bv, gout, &da, &db).
template <class FwdFn, class BwdFn>
Var binary_elem(const Var& a, const Var& b, FwdFn f, BwdFn df) {
    if (same_shape(a, b)) {
        // fast path, no stride bookkeeping
        Tensor out(a.shape());
        const double* pa = a.value().data();
        const double* pb = b.value().data();
        double* po = out.data();
        const int64_t n = out.numel();
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        return Var::make_op(std::move(out), {a, b}, [a, b, df](detail::Node& node) {
            const double* pa = a.value().data();
            const double* pb = b.value().data();
            const double* go = node.grad.data();
            double* ga = a.requires_grad() ? a.grad().data() : nullptr;
            double* gb = b.requires_grad() ? b.grad().data() : nullptr;
            const int64_t n = node.value.numel();
            for (int64_t i = 0; i < n; ++i) {
                double da = 0, db = 0;
                df(pa[i], pb[i], go[i], da, db);
                if (ga) ga[i] += da;
                if (gb) gb[i] += db;
            }
        });
    }
    std::vector<int64_t> out_shape = broadcast_shape(a.shape(), b.shape());
    std::vector<int64_t> sa = bcast_strides(a.shape(), out_shape);
    std::vector<int64_t> sb = bcast_strides(b.shape(), out_shape);
    Tensor out(out_shape);
    {
        const double* pa = a.value().data();
        const double* pb = b.value().data();
        double* po = out.data();
        bcast_iterate2(out_shape, sa, sb, [&](int64_t o, int64_t ai, int64_t bi) { po[o] = f(pa[ai], pb[bi]); });
    }
    return Var::make_op(std::move(out), {a, b}, [a, b, sa, sb, df](detail::Node& node) {
        const double* pa = a.value().data();
        const double* pb = b.value().data();
        const double* go = node.grad.data();
        double* ga = a.requires_grad() ? a.grad().data() : nullptr;
        double* gb = b.requires_grad() ? b.grad().data() : nullptr;
        bcast_iterate2(node.value.shape(), sa, sb, [&](int64_t o, int64_t ai, int64_t bi) {
            double da = 0, db = 0;
            df(pa[ai], pb[bi], go[o], da, db);
            if (ga) ga[ai] += da;
            if (gb) gb[bi] += db;
        });
    });
}

// Elementwise unary op. FwdFn: double(double); BwdFn: double dx given (x, y, g).
template <class FwdFn, class BwdFn>
Var unary_elem(const Var& a, FwdFn f, BwdFn df) {
    Tensor out(a.shape());
    const double* pa = a.value().data();
    double* po = out.data();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
    return Var::make_op(std::move(out), {a}, [a, df](detail::Node& node) {
        if (!a.requires_grad()) return;
        const double* pa = a.value().data();
        const double* py = node.value.data();
        const double* go = node.grad.data();
        double* ga = a.grad().data();
        const int64_t n = node.value.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += df(pa[i], py[i], go[i]);
    });
}

// View a shape as (outer, len, inner) around `axis`.
void axis_split(const std::vector<int64_t>& shape, int64_t axis, int64_t& outer, int64_t& len, int64_t& inner) {
    outer = 1;
    inner = 1;
    for (int64_t i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
    len = shape[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) inner *= shape[i];
}

} // namespace

std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    const size_t nd = std::max(a.size(), b.size());
    std::vector<int64_t> out(nd);
    for (size_t i = 0; i < nd; ++i) {
        const int64_t ad = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        const int64_t bd = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (ad != bd && ad != 1 && bd != 1) {
            throw std::invalid_argument("broadcast: incompatible shapes " + Tensor::shape_str(a) + " vs " +
                                        Tensor::shape_str(b));
        }
        out[i] = std::max(ad, bd);
    }
    return out;
}

Tensor reduce_to_shape(const Tensor& g, const std::vector<int64_t>& target_shape) {
    if (g.shape() == target_shape) return g;
    Tensor out(target_shape);
    std::vector<int64_t> st = bcast_strides(target_shape, g.shape());
    const double* pg = g.data();
    double* po = out.data();
    bcast_iterate1(g.shape(), st, [&](int64_t o, int64_t t) { po[t] += pg[o]; });
    return out;
}

void accumulate(Tensor& into, const Tensor& from) {
    if (into.shape() != from.shape()) throw std::logic_error("accumulate: shape mismatch");
    double* pi = into.data();
    const double* pf = from.data();
    const int64_t n = into.numel();
    for (int64_t i = 0; i < n; ++i) pi[i] += pf[i];
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
    return binary_elem(
        a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Var sub(const Var& a, const Var& b) {
    return binary_elem(
        a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Var mul(const Var& a, const Var& b) {
    return binary_elem(
        a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Var div(const Var& a, const Var& b) {
    return binary_elem(
        a, b, [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Var minimum(const Var& a, const Var& b) {
    return binary_elem(
        a, b, [](double x, double y) { return x <= y ? x : y; },
        [](double x, double y, double g, double& da, double& db) {
            if (x <= y) {
                da = g;
                db = 0;
            } else {
                da = 0;
                db = g;
            }
        });
}

Var add_scalar(const Var& a, double s) {
    return unary_elem(
        a, [s](double x) { return x + s; }, [](double, double, double g) { return g; });
}

Var mul_scalar(const Var& a, double s) {
    return unary_elem(
        a, [s](double x) { return x * s; }, [s](double, double, double g) { return g * s; });
}

// ---- unary ----

Var neg(const Var& a) {
    return unary_elem(
        a, [](double x) { return -x; }, [](double, double, double g) { return -g; });
}

Var abs(const Var& a) {
    return unary_elem(
        a, [](double x) { return std::fabs(x); },
        [](double x, double, double g) { return x > 0 ? g : (x < 0 ? -g : 0.0); });
}

Var exp(const Var& a) {
    return unary_elem(
        a, [](double x) { return std::exp(x); }, [](double, double y, double g) { return g * y; });
}

Var log(const Var& a) {
    return unary_elem(
        a, [](double x) { return std::log(x); }, [](double x, double, double g) { return g / x; });
}

Var sqrt(const Var& a) {
    return unary_elem(
        a, [](double x) { return std::sqrt(x); }, [](double, double y, double g) { return g / (2.0 * y); });
}

Var square(const Var& a) {
    return unary_elem(
        a, [](double x) { return x * x; }, [](double x, double, double g) { return 2.0 * g * x; });
}

Var reciprocal(const Var& a) {
    return unary_elem(
        a, [](double x) { return 1.0 / x; }, [](double x, double, double g) { return -g / (x * x); });
}

Var sigmoid(const Var& a) {
    return unary_elem(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y, double g) { return g * y * (1.0 - y); });
}

Var relu(const Var& a) {
    return unary_elem(
        a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double, double g) { return x > 0 ? g : 0.0; });
}

Var elu(const Var& a) {
    return unary_elem(
        a, [](double x) { return x > 0 ? x : std::expm1(x); },
        [](double x, double y, double g) { return x > 0 ? g : g * (y + 1.0); });
}

Var clamp(const Var& a, double lo, double hi) {
    return unary_elem(
        a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double, double g) { return (x >= lo && x <= hi) ? g : 0.0; });
}

Var detach(const Var& a) { return Var::constant(a.value()); }

// ---- reductions ----

Var sum_all(const Var& a) {
    double s = 0;
    const double* p = a.value().data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) s += p[i];
    return Var::make_op(Tensor::scalar(s), {a}, [a](detail::Node& node) {
        if (!a.requires_grad()) return;
        const double g = node.grad[0];
        double* ga = a.grad().data();
        const int64_t n = a.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += g;
    });
}

Var mean_all(const Var& a) { return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Var sum_axis(const Var& a, int64_t axis, bool keepdim) {
    int64_t outer, len, inner;
    axis_split(a.shape(), axis, outer, len, inner);
    std::vector<int64_t> out_shape = a.shape();
    if (keepdim) {
        out_shape[static_cast<size_t>(axis)] = 1;
    } else {
        out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
        if (out_shape.empty()) out_shape = {1};
    }
    Tensor out(out_shape);
    const double* pa = a.value().data();
    double* po = out.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t l = 0; l < len; ++l)
            for (int64_t i = 0; i < inner; ++i) po[o * inner + i] += pa[(o * len + l) * inner + i];
    return Var::make_op(std::move(out), {a}, [a, outer, len, inner](detail::Node& node) {
        if (!a.requires_grad()) return;
        const double* go = node.grad.data();
        double* ga = a.grad().data();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t l = 0; l < len; ++l)
                for (int64_t i = 0; i < inner; ++i) ga[(o * len + l) * inner + i] += go[o * inner + i];
    });
}

Var mean_axis(const Var& a, int64_t axis, bool keepdim) {
    const double len = static_cast<double>(a.shape()[static_cast<size_t>(axis)]);
    return mul_scalar(sum_axis(a, axis, keepdim), 1.0 / len);
}

// ---- shape ----

Var reshape(const Var& a, std::vector<int64_t> shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return Var::make_op(std::move(out), {a}, [a](detail::Node& node) {
        if (!a.requires_grad()) return;
        accumulate(a.grad(), node.grad.reshaped(a.shape()));
    });
}

Var slice(const Var& a, int64_t axis, int64_t start, int64_t len) {
    int64_t outer, alen, inner;
    axis_split(a.shape(), axis, outer, alen, inner);
    if (start < 0 || start + len > alen) throw std::invalid_argument("slice: out of range");
    std::vector<int64_t> out_shape = a.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    Tensor out(out_shape);
    const double* pa = a.value().data();
    double* po = out.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t l = 0; l < len; ++l)
            std::copy_n(pa + ((o * alen + start + l) * inner), inner, po + (o * len + l) * inner);
    return Var::make_op(std::move(out), {a}, [a, outer, alen, inner, start, len](detail::Node& node) {
        if (!a.requires_grad()) return;
        const double* go = node.grad.data();
        double* ga = a.grad().data();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t l = 0; l < len; ++l)
                for (int64_t i = 0; i < inner; ++i)
                    ga[(o * alen + start + l) * inner + i] += go[(o * len + l) * inner + i];
    });
}

Var concat(const std::vector<Var>& parts, int64_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    std::vector<int64_t> out_shape = parts[0].shape();
    std::vector<int64_t> lens;
    lens.reserve(parts.size());
    int64_t total_len = 0;
    for (const Var& p : parts) {
        for (size_t d = 0; d < out_shape.size(); ++d) {
            if (d != static_cast<size_t>(axis) && p.shape()[d] != out_shape[d]) {
                throw std::invalid_argument("concat: shape mismatch off the concat axis");
            }
        }
        lens.push_back(p.shape()[static_cast<size_t>(axis)]);
        total_len += lens.back();
    }
    out_shape[static_cast<size_t>(axis)] = total_len;
    int64_t outer, olen, inner;
    axis_split(out_shape, axis, outer, olen, inner);
    Tensor out(out_shape);
    double* po = out.data();
    int64_t off = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const int64_t plen = lens[pi];
        const double* pp = parts[pi].value().data();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t l = 0; l < plen; ++l)
                std::copy_n(pp + (o * plen + l) * inner, inner, po + (o * olen + off + l) * inner);
        off += plen;
    }
    return Var::make_op(std::move(out), parts, [parts, lens, outer, olen, inner](detail::Node& node) {
        const double* go = node.grad.data();
        int64_t off = 0;
        for (size_t pi = 0; pi < parts.size(); ++pi) {
            const int64_t plen = lens[pi];
            if (parts[pi].requires_grad()) {
                double* gp = parts[pi].grad().data();
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t l = 0; l < plen; ++l)
                        for (int64_t i = 0; i < inner; ++i)
                            gp[(o * plen + l) * inner + i] += go[(o * olen + off + l) * inner + i];
            }
            off += plen;
        }
    });
}

// ---- linear algebra ----

Var matmul(const Var& a, const Var& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
        throw std::invalid_argument("matmul: bad shapes " + Tensor::shape_str(as) + " x " + Tensor::shape_str(bs));
    }
    const int64_t m = as[0], k = as[1], n = bs[1];
    Tensor out({m, n});
    {
        ConstMatMap A(a.value().data(), m, k);
        ConstMatMap B(b.value().data(), k, n);
        MatMap O(out.data(), m, n);
        O.noalias() = A * B;
    }
    return Var::make_op(std::move(out), {a, b}, [a, b, m, k, n](detail::Node& node) {
        ConstMatMap G(node.grad.data(), m, n);
        if (a.requires_grad()) {
            ConstMatMap B(b.value().data(), k, n);
            MatMap GA(a.grad().data(), m, k);
            GA.noalias() += G * B.transpose();
        }
        if (b.requires_grad()) {
            ConstMatMap A(a.value().data(), m, k);
            MatMap GB(b.grad().data(), k, n);
            GB.noalias() += A.transpose() * G;
        }
    });
}

Var batched_matmul(const Var& a, const Var& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1]) {
        throw std::invalid_argument("batched_matmul: bad shapes " + Tensor::shape_str(as) + " x " +
                                    Tensor::shape_str(bs));
    }
    const int64_t B = as[0], m = as[1], k = as[2], n = bs[2];
    Tensor out({B, m, n});
    for (int64_t i = 0; i < B; ++i) {
        ConstMatMap A(a.value().data() + i * m * k, m, k);
        ConstMatMap Bm(b.value().data() + i * k * n, k, n);
        MatMap O(out.data() + i * m * n, m, n);
        O.noalias() = A * Bm;
    }
    return Var::make_op(std::move(out), {a, b}, [a, b, B, m, k, n](detail::Node& node) {
        for (int64_t i = 0; i < B; ++i) {
            ConstMatMap G(node.grad.data() + i * m * n, m, n);
            if (a.requires_grad()) {
                ConstMatMap Bm(b.value().data() + i * k * n, k, n);
                MatMap GA(a.grad().data() + i * m * k, m, k);
                GA.noalias() += G * Bm.transpose();
            }
            if (b.requires_grad()) {
                ConstMatMap A(a.value().data() + i * m * k, m, k);
                MatMap GB(b.grad().data() + i * k * n, k, n);
                GB.noalias() += A.transpose() * G;
            }
        }
    });
}

Var transpose_last2(const Var& a) {
    const auto& s = a.shape();
    if (s.size() < 2) throw std::invalid_argument("transpose_last2: rank < 2");
    const int64_t r = s[s.size() - 2], c = s[s.size() - 1];
    int64_t batch = 1;
    for (size_t i = 0; i + 2 < s.size(); ++i) batch *= s[i];
    std::vector<int64_t> out_shape = s;
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    Tensor out(out_shape);
    const double* pa = a.value().data();
    double* po = out.data();
    for (int64_t bb = 0; bb < batch; ++bb)
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) po[bb * r * c + j * r + i] = pa[bb * r * c + i * c + j];
    return Var::make_op(std::move(out), {a}, [a, batch, r, c](detail::Node& node) {
        if (!a.requires_grad()) return;
        const double* go = node.grad.data();
        double* ga = a.grad().data();
        for (int64_t bb = 0; bb < batch; ++bb)
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) ga[bb * r * c + i * c + j] += go[bb * r * c + j * r + i];
    });
}

Var softmax(const Var& x, int64_t axis) {
    int64_t outer, len, inner;
    axis_split(x.shape(), axis, outer, len, inner);
    Tensor out(x.shape());
    const double* px = x.value().data();
    double* po = out.data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * len * inner + i;
            double mx = px[base];
            for (int64_t l = 1; l < len; ++l) mx = std::max(mx, px[base + l * inner]);
            double denom = 0;
            for (int64_t l = 0; l < len; ++l) {
                const double e = std::exp(px[base + l * inner] - mx);
                po[base + l * inner] = e;
                denom += e;
            }
            for (int64_t l = 0; l < len; ++l) po[base + l * inner] /= denom;
        }
    }
    return Var::make_op(std::move(out), {x}, [x, outer, len, inner](detail::Node& node) {
        if (!x.requires_grad()) return;
        const double* py = node.value.data();
        const double* go = node.grad.data();
        double* gx = x.grad().data();
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t i = 0; i < inner; ++i) {
                const int64_t base = o * len * inner + i;
                double dot = 0;
                for (int64_t l = 0; l < len; ++l) dot += go[base + l * inner] * py[base + l * inner];
                for (int64_t l = 0; l < len; ++l) {
                    gx[base + l * inner] += py[base + l * inner] * (go[base + l * inner] - dot);
                }
            }
        }
    });
}

} // namespace sadepth::ops
