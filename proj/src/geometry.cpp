#include "sadepth/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace sadepth::geometry {

namespace {

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            out[i][j] = s;
        }
    return out;
}

Mat3 mat_transpose(const Mat3& a) {
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = a[j][i];
    return out;
}

Vec3 mat_vec(const Mat3& a, const Vec3& v) {
    Vec3 out{};
    for (int i = 0; i < 3; ++i) out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    return out;
}

// Series-safe coefficients of R = I + c1*[a]x + c2*([a]x)^2 as functions of
// t = theta^2, plus their t-derivatives (used by the backward pass).
void rodrigues_coeffs(double t, double& c1, double& c2, double& dc1, double& dc2) {
    if (t < 1e-8) {
        c1 = 1.0 - t / 6.0 + t * t / 120.0;
        c2 = 0.5 - t / 24.0 + t * t / 720.0;
        dc1 = -1.0 / 6.0 + t / 60.0;
        dc2 = -1.0 / 24.0 + t / 360.0;
        return;
    }
    const double theta = std::sqrt(t);
    const double s = std::sin(theta), c = std::cos(theta);
    c1 = s / theta;
    c2 = (1.0 - c) / t;
    dc1 = (theta * c - s) / (2.0 * theta * t);
    dc2 = (theta * s - 2.0 * (1.0 - c)) / (2.0 * t * t);
}

Mat3 rodrigues_matrix(const Vec3& a) {
    const double t = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    double c1, c2, dc1, dc2;
    rodrigues_coeffs(t, c1, c2, dc1, dc2);
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[i][j] = c2 * a[i] * a[j];
    r[0][0] += 1.0 - c2 * t;
    r[1][1] += 1.0 - c2 * t;
    r[2][2] += 1.0 - c2 * t;
    r[0][1] += -c1 * a[2];
    r[0][2] += c1 * a[1];
    r[1][0] += c1 * a[2];
    r[1][2] += -c1 * a[0];
    r[2][0] += -c1 * a[1];
    r[2][1] += c1 * a[0];
    return r;
}

} // namespace

Intrinsics Intrinsics::scaled(double s) const {
    Intrinsics out = *this;
    out.fx = fx * s;
    out.fy = fy * s;
    out.cx = cx * s;
    out.cy = cy * s;
    out.width = static_cast<int64_t>(std::llround(static_cast<double>(width) * s));
    out.height = static_cast<int64_t>(std::llround(static_cast<double>(height) * s));
    return out;
}

void Intrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Intrinsics: focal lengths must be positive");
    if (!(cx >= 0 && cx < static_cast<double>(width)) || !(cy >= 0 && cy < static_cast<double>(height))) {
        throw std::invalid_argument("Intrinsics: principal point outside the image");
    }
}

void RigidTransform::validate() const {
    const Mat3 rtr = mat_mul(mat_transpose(rotation), rotation);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = i == j ? 1.0 : 0.0;
            if (std::fabs(rtr[i][j] - want) > 1e-6) {
                throw std::invalid_argument("RigidTransform: rotation is not orthonormal");
            }
        }
    const Mat3& r = rotation;
    const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    if (std::fabs(det - 1.0) > 1e-6) throw std::invalid_argument("RigidTransform: rotation determinant is not +1");
}

RigidTransform axis_angle_to_transform(const Vec3& axis_angle, const Vec3& translation) {
    RigidTransform out;
    out.rotation = rodrigues_matrix(axis_angle);
    out.translation = translation;
    return out;
}

RigidTransform invert(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = mat_transpose(t.rotation);
    const Vec3 rt = mat_vec(out.rotation, t.translation);
    out.translation = {-rt[0], -rt[1], -rt[2]};
    return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = mat_mul(a.rotation, b.rotation);
    const Vec3 rb = mat_vec(a.rotation, b.translation);
    out.translation = {rb[0] + a.translation[0], rb[1] + a.translation[1], rb[2] + a.translation[2]};
    return out;
}

Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
    const Vec3 rp = mat_vec(t.rotation, p);
    return {rp[0] + t.translation[0], rp[1] + t.translation[1], rp[2] + t.translation[2]};
}

Var backproject(const Var& depth, const Intrinsics& k) {
    const auto& ds = depth.shape();
    if (ds.size() != 4 || ds[1] != 1) throw std::invalid_argument("backproject: depth must be (N,1,H,W)");
    const int64_t H = ds[2], W = ds[3];
    const double* pd = depth.value().data();
    for (int64_t i = 0; i < depth.numel(); ++i) {
        if (!(pd[i] > 0)) throw std::invalid_argument("backproject: depth must be positive everywhere");
    }
    Tensor dirs({1, 3, H, W});
    double* pdir = dirs.data();
    for (int64_t v = 0; v < H; ++v)
        for (int64_t u = 0; u < W; ++u) {
            pdir[0 * H * W + v * W + u] = (static_cast<double>(u) - k.cx) / k.fx;
            pdir[1 * H * W + v * W + u] = (static_cast<double>(v) - k.cy) / k.fy;
            pdir[2 * H * W + v * W + u] = 1.0;
        }
    return ops::mul(depth, Var::constant(std::move(dirs)));
}

SampleGrid project(const Var& points, const Intrinsics& k, const Var& rotation, const Var& translation) {
    const auto& ps = points.shape();
    if (ps.size() != 4 || ps[1] != 3) throw std::invalid_argument("project: points must be (N,3,H,W)");
    const int64_t N = ps[0], H = ps[2], W = ps[3];
    if (rotation.shape() != std::vector<int64_t>{N, 3, 3} || translation.shape() != std::vector<int64_t>{N, 3}) {
        throw std::invalid_argument("project: rotation must be (N,3,3) and translation (N,3)");
    }
    const double fx = k.fx, fy = k.fy, cx = k.cx, cy = k.cy;
    const double umax = static_cast<double>(k.width - 1), vmax = static_cast<double>(k.height - 1);
    Tensor coords({N, H, W, 2});
    Tensor valid({N, 1, H, W});
    const double* pp = points.value().data();
    const double* pr = rotation.value().data();
    const double* pt = translation.value().data();
    double* pc = coords.data();
    double* pv = valid.data();
    const int64_t plane = H * W;
    for (int64_t n = 0; n < N; ++n) {
        const double* R = pr + n * 9;
        const double* t = pt + n * 3;
        const double* px = pp + n * 3 * plane;
        for (int64_t i = 0; i < plane; ++i) {
            const double p0 = px[i], p1 = px[plane + i], p2 = px[2 * plane + i];
            const double q0 = R[0] * p0 + R[1] * p1 + R[2] * p2 + t[0];
            const double q1 = R[3] * p0 + R[4] * p1 + R[5] * p2 + t[1];
            const double q2 = R[6] * p0 + R[7] * p1 + R[8] * p2 + t[2];
            const double zc = std::max(q2, kZEps);
            const double u = fx * q0 / zc + cx;
            const double v = fy * q1 / zc + cy;
            pc[(n * plane + i) * 2] = u;
            pc[(n * plane + i) * 2 + 1] = v;
            // 1e-9 px slack absorbs round-off at the image border
            pv[n * plane + i] =
                (q2 > kZEps && u >= -1e-9 && u <= umax + 1e-9 && v >= -1e-9 && v <= vmax + 1e-9) ? 1.0 : 0.0;
        }
    }
    Var out = Var::make_op(std::move(coords), {points, rotation, translation},
                           [points, rotation, translation, fx, fy, N, plane](detail::Node& node) {
                               const double* pp = points.value().data();
                               const double* pr = rotation.value().data();
                               const double* pt = translation.value().data();
                               const double* go = node.grad.data();
                               double* gp = points.requires_grad() ? points.grad().data() : nullptr;
                               double* gr = rotation.requires_grad() ? rotation.grad().data() : nullptr;
                               double* gt = translation.requires_grad() ? translation.grad().data() : nullptr;
                               for (int64_t n = 0; n < N; ++n) {
                                   const double* R = pr + n * 9;
                                   const double* t = pt + n * 3;
                                   const double* px = pp + n * 3 * plane;
                                   for (int64_t i = 0; i < plane; ++i) {
                                       const double gu = go[(n * plane + i) * 2];
                                       const double gv = go[(n * plane + i) * 2 + 1];
                                       if (gu == 0.0 && gv == 0.0) continue;
                                       const double p0 = px[i], p1 = px[plane + i], p2 = px[2 * plane + i];
                                       const double q0 = R[0] * p0 + R[1] * p1 + R[2] * p2 + t[0];
                                       const double q1 = R[3] * p0 + R[4] * p1 + R[5] * p2 + t[1];
                                       const double q2 = R[6] * p0 + R[7] * p1 + R[8] * p2 + t[2];
                                       const bool clamped = q2 <= kZEps;
                                       const double zc = clamped ? kZEps : q2;
                                       const double dq0 = gu * fx / zc;
                                       const double dq1 = gv * fy / zc;
                                       const double dq2 = clamped ? 0.0 : -(gu * fx * q0 + gv * fy * q1) / (zc * zc);
                                       if (gp) {
                                           gp[n * 3 * plane + i] += R[0] * dq0 + R[3] * dq1 + R[6] * dq2;
                                           gp[n * 3 * plane + plane + i] += R[1] * dq0 + R[4] * dq1 + R[7] * dq2;
                                           gp[n * 3 * plane + 2 * plane + i] += R[2] * dq0 + R[5] * dq1 + R[8] * dq2;
                                       }
                                       if (gt) {
                                           gt[n * 3] += dq0;
                                           gt[n * 3 + 1] += dq1;
                                           gt[n * 3 + 2] += dq2;
                                       }
                                       if (gr) {
                                           double* G = gr + n * 9;
                                           G[0] += dq0 * p0;
                                           G[1] += dq0 * p1;
                                           G[2] += dq0 * p2;
                                           G[3] += dq1 * p0;
                                           G[4] += dq1 * p1;
                                           G[5] += dq1 * p2;
                                           G[6] += dq2 * p0;
                                           G[7] += dq2 * p1;
                                           G[8] += dq2 * p2;
                                       }
                                   }
                               }
                           });
    return SampleGrid{out, std::move(valid)};
}

SampleGrid project(const Var& points, const Intrinsics& k, const RigidTransform& t) {
    const int64_t N = points.shape()[0];
    return project(points, k, rotation_constant(t, N), translation_constant(t, N));
}

Var bilinear_sample(const Var& image, const SampleGrid& grid) { return ops::grid_sample(image, grid.coords); }

Var rodrigues(const Var& axis_angle) {
    const auto& as = axis_angle.shape();
    if (as.size() != 2 || as[1] != 3) throw std::invalid_argument("rodrigues: input must be (N,3)");
    const int64_t N = as[0];
    Tensor out({N, 3, 3});
    const double* pa = axis_angle.value().data();
    double* po = out.data();
    for (int64_t n = 0; n < N; ++n) {
        const Mat3 r = rodrigues_matrix({pa[n * 3], pa[n * 3 + 1], pa[n * 3 + 2]});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) po[n * 9 + i * 3 + j] = r[i][j];
    }
    return Var::make_op(std::move(out), {axis_angle}, [axis_angle, N](detail::Node& node) {
        if (!axis_angle.requires_grad()) return;
        const double* pa = axis_angle.value().data();
        const double* go = node.grad.data();
        double* ga = axis_angle.grad().data();
        for (int64_t n = 0; n < N; ++n) {
            const double a[3] = {pa[n * 3], pa[n * 3 + 1], pa[n * 3 + 2]};
            const double t = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
            double c1, c2, dc1, dc2;
            rodrigues_coeffs(t, c1, c2, dc1, dc2);
            const double* G = go + n * 9;
            // dR/da_i assembled from R = I + c1*K + c2*(a a^T - t I).
            for (int i = 0; i < 3; ++i) {
                double acc = 0;
                const double two_ai = 2.0 * a[i];
                // (dc1 * 2 a_i) * K  and  c1 * d K / d a_i
                // K entries: K[0][1]=-a2 K[0][2]=a1 K[1][0]=a2 K[1][2]=-a0 K[2][0]=-a1 K[2][1]=a0
                const double K01 = -a[2], K02 = a[1], K10 = a[2], K12 = -a[0], K20 = -a[1], K21 = a[0];
                acc += dc1 * two_ai * (G[1] * K01 + G[2] * K02 + G[3] * K10 + G[5] * K12 + G[6] * K20 + G[7] * K21);
                if (i == 0) acc += c1 * (-G[5] + G[7]);
                if (i == 1) acc += c1 * (G[2] - G[6]);
                if (i == 2) acc += c1 * (-G[1] + G[3]);
                // (dc2 * 2 a_i) * (a a^T - t I)
                double frob = 0;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) frob += G[r * 3 + c] * (a[r] * a[c] - (r == c ? t : 0.0));
                acc += dc2 * two_ai * frob;
                // c2 * (e_i a^T + a e_i^T - 2 a_i I)
                double lin = 0;
                for (int c = 0; c < 3; ++c) lin += G[i * 3 + c] * a[c];
                for (int r = 0; r < 3; ++r) lin += G[r * 3 + i] * a[r];
                lin -= two_ai * (G[0] + G[4] + G[8]);
                acc += c2 * lin;
                ga[n * 3 + i] += acc;
            }
        }
    });
}

Var rotation_constant(const RigidTransform& t, int64_t batch) {
    Tensor r({batch, 3, 3});
    for (int64_t n = 0; n < batch; ++n)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[n * 9 + i * 3 + j] = t.rotation[i][j];
    return Var::constant(std::move(r));
}

Var translation_constant(const RigidTransform& t, int64_t batch) {
    Tensor v({batch, 3});
    for (int64_t n = 0; n < batch; ++n)
        for (int i = 0; i < 3; ++i) v[n * 3 + i] = t.translation[i];
    return Var::constant(std::move(v));
}

} // namespace sadepth::geometry
