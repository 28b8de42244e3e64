#include "hjb/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include "hjb/pde.hpp"

namespace hjb {

SurfaceSample NetworkSurface::sample(double t, const Vec2& y) const {
    const NetJet j = net_.jet(t, y);
    return {j.value, j.grad};
}

SurfaceSample CubeSurface::node_sample(int n, int i, int j) const {
    const Grid3D& g = cube_.grid();
    SurfaceSample s;
    s.u = cube_.at(n, i, j);
    auto diff = [&](int lo_i, int lo_j, int hi_i, int hi_j, double h) {
        return (cube_.at(n, hi_i, hi_j) - cube_.at(n, lo_i, lo_j)) / h;
    };
    if (i == 0)
        s.grad[0] = diff(0, j, 1, j, g.dy1());
    else if (i == g.n1)
        s.grad[0] = diff(g.n1 - 1, j, g.n1, j, g.dy1());
    else
        s.grad[0] = diff(i - 1, j, i + 1, j, 2.0 * g.dy1());
    if (j == 0)
        s.grad[1] = diff(i, 0, i, 1, g.dy2());
    else if (j == g.n2)
        s.grad[1] = diff(i, g.n2 - 1, i, g.n2, g.dy2());
    else
        s.grad[1] = diff(i, j - 1, i, j + 1, 2.0 * g.dy2());
    return s;
}

SurfaceSample CubeSurface::level_sample(int n, const Vec2& y) const {
    const Grid3D& g = cube_.grid();
    auto locate = [](double x, double lo, double h, int cells, int& k, double& w) {
        const double s = std::clamp((x - lo) / h, 0.0, static_cast<double>(cells));
        k = std::min(static_cast<int>(std::floor(s)), cells - 1);
        w = s - k;
    };
    int i = 0, j = 0;
    double wi = 0.0, wj = 0.0;
    locate(y[0], g.y1_lo, g.dy1(), g.n1, i, wi);
    locate(y[1], g.y2_lo, g.dy2(), g.n2, j, wj);
    const SurfaceSample a = node_sample(n, i, j), b = node_sample(n, i + 1, j),
                        c = node_sample(n, i, j + 1), d = node_sample(n, i + 1, j + 1);
    const double w00 = (1 - wi) * (1 - wj), w10 = wi * (1 - wj), w01 = (1 - wi) * wj,
                 w11 = wi * wj;
    return {w00 * a.u + w10 * b.u + w01 * c.u + w11 * d.u,
            w00 * a.grad + w10 * b.grad + w01 * c.grad + w11 * d.grad};
}

SurfaceSample CubeSurface::sample(double t, const Vec2& y) const {
    const Grid3D& g = cube_.grid();
    const double s = std::clamp(t / g.dt(), 0.0, static_cast<double>(g.nt));
    const int n = std::min(static_cast<int>(std::floor(s)), g.nt - 1);
    const double w = s - n;
    const SurfaceSample lo = level_sample(n, y);
    if (w == 0.0) return lo;
    const SurfaceSample hi = level_sample(n + 1, y);
    return {(1 - w) * lo.u + w * hi.u, (1 - w) * lo.grad + w * hi.grad};
}

double optimal_weight(const Vec2& y, const SurfaceSample& s, const Model& model) {
    if (!(s.u >= kMinReducedValue))
        throw DegenerateSurfaceError("reduced value below 1e-8 in portfolio formula");
    const ReturnMoments m = model.return_moments(y);
    if (!(m.Sigma > 0.0)) throw SingularSigmaError("return covariance is singular");
    const double hedge = m.upsilon.dot(s.grad) / s.u;
    return (m.mu / m.Sigma + hedge / m.Sigma) / (1.0 - model.p());
}

double optimal_weight(double t, const Vec2& y, const SolvedSurface& surface, const Model& model) {
    return optimal_weight(y, surface.sample(t, y), model);
}

double unreduced_weight(double x, const Vec2& y, const ValueDerivatives& dv, const Model& model) {
    if (!(x > 0.0)) throw DomainError("wealth must be positive");
    if (!(dv.V_xx < 0.0)) throw ConvexityError("value function must be strictly concave in wealth");
    const ReturnMoments m = model.return_moments(y);
    if (!(m.Sigma > 0.0)) throw SingularSigmaError("return covariance is singular");
    return -(m.mu * dv.V_x + m.upsilon.dot(dv.grad_y_V_x)) / (x * dv.V_xx * m.Sigma);
}

}  // namespace hjb
