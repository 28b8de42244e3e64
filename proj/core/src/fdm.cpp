#include "hjb/fdm.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hjb/pde.hpp"

namespace hjb {

Grid3D Grid3D::from(const StateDomain& d, int nt, int n1, int n2) {
    Grid3D g;
    g.nt = nt;
    g.n1 = n1;
    g.n2 = n2;
    g.T = d.t_hi;
    g.y1_lo = d.y1_lo;
    g.y1_hi = d.y1_hi;
    g.y2_lo = d.y2_lo;
    g.y2_hi = d.y2_hi;
    g.validate();
    return g;
}

void Grid3D::validate() const {
    if (nt < 1 || n1 < 2 || n2 < 2) throw ConfigError("grid needs nt >= 1 and n1, n2 >= 2");
    if (!(T > 0.0) || !(y1_lo < y1_hi) || !(y2_lo < y2_hi))
        throw ConfigError("grid bounds must be increasing");
}

SolutionCube::SolutionCube(const Grid3D& grid)
    : grid_(grid),
      values_(static_cast<std::size_t>(grid.nt + 1) * grid.level_size(),
              std::numeric_limits<double>::quiet_NaN()) {}

BoundaryProvider constant_one_boundary() {
    return [](double, double, double) { return 1.0; };
}

BoundaryProvider network_boundary(Network net) {
    return [net = std::move(net)](double t, double y1, double y2) {
        return net.forward(t, Vec2(y1, y2));
    };
}

StencilCoefficients StencilCoefficients::from(const CoefficientSet& c) {
    StencilCoefficients s;
    s.C1 = c.first_order[0];
    s.C2 = c.first_order[1];
    s.C3 = c.second_order(0, 0);
    s.C4 = 2.0 * c.second_order(0, 1);
    s.C5 = c.second_order(1, 1);
    s.C6 = c.zeroth_order;
    s.C7 = c.grad_quad(0, 0);
    s.C8 = 2.0 * c.grad_quad(0, 1);
    s.C9 = c.grad_quad(1, 1);
    return s;
}

std::vector<StencilCoefficients> stencil_coefficients(const Grid3D& grid, const Model& model) {
    std::vector<StencilCoefficients> out(grid.interior_count());
    for (int i = 1; i < grid.n1; ++i)
        for (int j = 1; j < grid.n2; ++j)
            out[grid.unknown(i, j)] =
                StencilCoefficients::from(model.coefficients(Vec2(grid.y1(i), grid.y2(j))));
    return out;
}

namespace {

struct Neighbourhood {
    double c, e, w, n, s, ne, se, nw, sw;
};

Neighbourhood gather(const Grid3D& g, std::span<const double> u, int i, int j) {
    return {u[g.node(i, j)],         u[g.node(i + 1, j)],     u[g.node(i - 1, j)],
            u[g.node(i, j + 1)],     u[g.node(i, j - 1)],     u[g.node(i + 1, j + 1)],
            u[g.node(i + 1, j - 1)], u[g.node(i - 1, j + 1)], u[g.node(i - 1, j - 1)]};
}

void check_sizes(const Grid3D& g, std::size_t coeffs, std::size_t a, std::size_t b) {
    if (coeffs != g.interior_count() || a != g.level_size() || b != g.level_size())
        throw DomainError("stencil inputs do not match the grid");
}

double stencil_value(const Grid3D& g, const StencilCoefficients& C, const Neighbourhood& v,
                     double u_next) {
    const double h1 = g.dy1(), h2 = g.dy2();
    if (!(std::abs(v.c) >= kMinReducedValue))
        throw DivisionHazardError("grid value |u| below 1e-8 in the stencil");
    const double D1 = (v.e - v.w) / (2.0 * h1);
    const double D2 = (v.n - v.s) / (2.0 * h2);
    const double D11 = (v.e - 2.0 * v.c + v.w) / (h1 * h1);
    const double D22 = (v.n - 2.0 * v.c + v.s) / (h2 * h2);
    const double D12 = (v.ne - v.se - v.nw + v.sw) / (4.0 * h1 * h2);
    const double Q = C.C7 * D1 * D1 + C.C8 * D1 * D2 + C.C9 * D2 * D2;
    return (u_next - v.c) / g.dt() + C.C1 * D1 + C.C2 * D2 + C.C3 * D11 + C.C4 * D12 +
           C.C5 * D22 + C.C6 * v.c - Q / v.c;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Eigen::VectorXd stencil_residual(const Grid3D& g, std::span<const StencilCoefficients> coeffs,
                                 std::span<const double> un, std::span<const double> unp1) {
    check_sizes(g, coeffs.size(), un.size(), unp1.size());
    Eigen::VectorXd F(static_cast<Eigen::Index>(g.interior_count()));
    for (int i = 1; i < g.n1; ++i)
        for (int j = 1; j < g.n2; ++j) {
            const std::size_t k = g.unknown(i, j);
            F[k] = stencil_value(g, coeffs[k], gather(g, un, i, j), unp1[g.node(i, j)]);
        }
    return F;
}

Eigen::VectorXd stencil_residual(const Grid3D& grid, const Model& model,
                                 std::span<const double> level_n,
                                 std::span<const double> level_np1) {
    const auto coeffs = stencil_coefficients(grid, model);
    return stencil_residual(grid, coeffs, level_n, level_np1);
}

namespace {

Eigen::SparseMatrix<double> stencil_jacobian(const Grid3D& g,
                                             std::span<const StencilCoefficients> coeffs,
                                             std::span<const double> u) {
    const double h1 = g.dy1(), h2 = g.dy2();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(g.interior_count() * 9);
    auto add = [&](std::size_t row, int i, int j, double v) {
        if (!g.on_boundary(i, j))
            trip.emplace_back(static_cast<int>(row), static_cast<int>(g.unknown(i, j)), v);
    };
    for (int i = 1; i < g.n1; ++i)
        for (int j = 1; j < g.n2; ++j) {
            const std::size_t row = g.unknown(i, j);
            const StencilCoefficients& C = coeffs[row];
            const Neighbourhood v = gather(g, u, i, j);
            const double D1 = (v.e - v.w) / (2.0 * h1);
            const double D2 = (v.n - v.s) / (2.0 * h2);
            const double Q = C.C7 * D1 * D1 + C.C8 * D1 * D2 + C.C9 * D2 * D2;
            const double dQ1 = (2.0 * C.C7 * D1 + C.C8 * D2) / v.c;
            const double dQ2 = (C.C8 * D1 + 2.0 * C.C9 * D2) / v.c;
            const double cross = C.C4 / (4.0 * h1 * h2);

            add(row, i, j,
                -1.0 / g.dt() - 2.0 * C.C3 / (h1 * h1) - 2.0 * C.C5 / (h2 * h2) + C.C6 +
                    Q / (v.c * v.c));
            add(row, i + 1, j, (C.C1 - dQ1) / (2.0 * h1) + C.C3 / (h1 * h1));
            add(row, i - 1, j, -(C.C1 - dQ1) / (2.0 * h1) + C.C3 / (h1 * h1));
            add(row, i, j + 1, (C.C2 - dQ2) / (2.0 * h2) + C.C5 / (h2 * h2));
            add(row, i, j - 1, -(C.C2 - dQ2) / (2.0 * h2) + C.C5 / (h2 * h2));
            add(row, i + 1, j + 1, cross);
            add(row, i + 1, j - 1, -cross);
            add(row, i - 1, j + 1, -cross);
            add(row, i - 1, j - 1, cross);
        }
    const auto n = static_cast<Eigen::Index>(g.interior_count());
    Eigen::SparseMatrix<double> J(n, n);
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
    return J;
}

}  // namespace

NewtonReport newton_solve_level(const Grid3D& g, std::span<const StencilCoefficients> coeffs,
                                std::span<const double> unp1, std::span<double> un,
                                const NewtonOptions& opts) {
    if (!(opts.tol > 0.0) || opts.max_iter < 1 || !(opts.rtol >= 0.0))
        throw ConfigError("Newton needs tol > 0, rtol >= 0 and max_iter >= 1");
    check_sizes(g, coeffs.size(), un.size(), unp1.size());

    NewtonReport report;
    Eigen::VectorXd F = stencil_residual(g, coeffs, un, unp1);
    report.residual_norms.push_back(inf_norm(F));

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool analysed = false;
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Eigen::SparseMatrix<double> J = stencil_jacobian(g, coeffs, un);
        if (!analysed) {
            lu.analyzePattern(J);
            analysed = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success)
            throw NewtonFailure("singular Jacobian in Newton step: " + lu.lastErrorMessage(), -1);
        const Eigen::VectorXd delta = lu.solve(-F);
        if (lu.info() != Eigen::Success || !delta.allFinite())
            throw NewtonFailure("Newton step could not be solved", -1);

        for (int i = 1; i < g.n1; ++i)
            for (int j = 1; j < g.n2; ++j) un[g.node(i, j)] += delta[g.unknown(i, j)];

        F = stencil_residual(g, coeffs, un, unp1);
        const double norm = inf_norm(F);
        report.residual_norms.push_back(norm);
        report.iterations = it;
        if (!std::isfinite(norm)) throw NewtonFailure("Newton residual is not finite", -1);
        report.met_abs_tol = norm <= opts.tol;
        if (report.met_abs_tol) return report;
        if (opts.rtol > 0.0) {
            double umax = 0.0;
            for (double v : un) umax = std::max(umax, std::abs(v));
            if (norm <= opts.rtol * umax / g.dt()) return report;
        }
    }
    std::ostringstream os;
    os << "Newton did not converge in " << opts.max_iter << " iterations (||F||_inf = "
       << report.residual_norms.back() << ")";
    throw NewtonFailure(os.str(), -1);
}

std::vector<int> BackwardResult::iteration_counts() const {
    std::vector<int> out;
    out.reserve(reports.size());
    for (const auto& r : reports) out.push_back(r.iterations);
    return out;
}

BackwardResult solve_backward(const Grid3D& g, const Model& model, const BoundaryProvider& boundary,
                              const NewtonOptions& opts, OnNewtonFailure on_failure) {
    g.validate();
    BackwardResult res{SolutionCube(g), std::vector<NewtonReport>(g.nt + 1), std::nullopt, {}};
    SolutionCube& cube = res.cube;
    const auto coeffs = stencil_coefficients(g, model);

    for (int i = 0; i <= g.n1; ++i)
        for (int j = 0; j <= g.n2; ++j) cube.at(g.nt, i, j) = 1.0;

    for (int n = g.nt - 1; n >= 0; --n) {
        const double t = g.t(n);
        for (int i = 0; i <= g.n1; ++i)
            for (int j = 0; j <= g.n2; ++j) {
                if (g.on_boundary(i, j)) {
                    const double b = boundary(t, g.y1(i), g.y2(j));
                    if (!std::isfinite(b)) {
                        std::ostringstream os;
                        os << "boundary provider returned a non-finite value at level " << n;
                        throw NewtonFailure(os.str(), n);
                    }
                    cube.at(n, i, j) = b;
                } else {
                    cube.at(n, i, j) = cube.at(n + 1, i, j);
                }
            }
        try {
            res.reports[n] = newton_solve_level(g, coeffs, cube.level(n + 1), cube.level(n), opts);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "level " << n << ": " << e.what();
            if (on_failure == OnNewtonFailure::raise) throw NewtonFailure(os.str(), n);
            res.failed_level = n;
            res.failure = os.str();
            // level n keeps the last Newton iterate; unsolved levels below it are NaN
            for (int m = n - 1; m >= 0; --m)
                for (double& v : cube.level(m)) v = std::numeric_limits<double>::quiet_NaN();
            break;
        }
    }
    return res;
}

}  // namespace hjb
