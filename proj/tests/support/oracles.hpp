#pragma once

// Test-only reference implementations. Deliberately naive: plain loops and
// scalar arithmetic, no use of the library's fused paths.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hjb/model.hpp"
#include "hjb/net.hpp"
#include "hjb/pde.hpp"

namespace hjb::oracle {

inline bool close(double a, double b, double rel, double abs_floor) {
    const double d = std::abs(a - b);
    return d <= abs_floor || d <= rel * std::max(std::abs(a), std::abs(b));
}

inline double rel_err(double a, double b, double abs_floor) {
    const double d = std::abs(a - b);
    const double s = std::max({std::abs(a), std::abs(b), abs_floor});
    return d / s;
}

/// Triple-loop C = A B.
inline Mat2 matmul(const Mat2& A, const Mat2& B) {
    Mat2 C;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 2; ++k) s += A(i, k) * B(k, j);
            C(i, j) = s;
        }
    return C;
}

/// Reduced HJB residual assembled term by term from b, a, mu, Sigma, Upsilon
/// (n = 1), without going through a CoefficientSet.
inline double reduced_residual(const PointJet& jet, const Vec2& b, const Mat2& a, double mu,
                               double Sigma, const Eigen::RowVector2d& ups, double p, double r) {
    const double q = p / (p - 1.0);
    double first = 0.0;
    for (int i = 0; i < 2; ++i) first += (b[i] - q * mu / Sigma * ups[i]) * jet.grad[i];
    // tr(a^T H a)
    double trace = 0.0;
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) trace += a(i, k) * jet.hess(i, j) * a(j, k);
    const double zeroth = (p * r - 0.5 * q * mu * mu / Sigma) * jet.u;
    double ug = 0.0;
    for (int i = 0; i < 2; ++i) ug += ups[i] * jet.grad[i];
    const double nonlinear = q / (2.0 * jet.u) * ug * ug / Sigma;
    return jet.du_dt + first + 0.5 * trace + zeroth - nonlinear;
}

/// Scalar re-evaluation of the network, neuron by neuron.
inline double net_forward(const Network& net, double t, double y1, double y2) {
    const InputScaling& s = net.scaling();
    const double in[3] = {t, y1, y2};
    double z[3];
    for (int k = 0; k < 3; ++k) {
        const double w = s.hi[k] - s.lo[k];
        z[k] = w > 0 ? 2.0 * (in[k] - s.lo[k]) / w - 1.0 : in[k] - s.lo[k];
    }
    double f = net.output_bias();
    for (int i = 0; i < net.hidden(); ++i) {
        double h = net.bias(i);
        for (int k = 0; k < 3; ++k) h += net.W(i, k) * z[k];
        f += net.beta(i) * std::tanh(h);
    }
    return f;
}

/// Central difference of a scalar function of one variable.
inline double central(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Network random_net(int n_hidden, std::mt19937_64& rng, const InputScaling& sc,
                          double scale = 1.0) {
    Network net(n_hidden, sc);
    std::normal_distribution<double> nd(0.0, scale);
    for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] = nd(rng);
    return net;
}

/// DGM loss J = mean R^2 (first n_interior points) + mean (f - 1)^2 (the
/// rest) as a BatchLoss, with adjoints written out from the residual's
/// partial derivatives. R itself comes from hjb::residual.
inline BatchLoss dgm_batch_loss(const Model& model, std::vector<InputPoint> points,
                                std::size_t n_interior) {
    return [&model, points = std::move(points), n_interior](std::span<const NetJet> jets,
                                                            std::span<JetAdjoint> adj) {
        const std::size_t n_term = jets.size() - n_interior;
        double J1 = 0.0, J2 = 0.0;
        for (std::size_t k = 0; k < jets.size(); ++k) {
            const NetJet& j = jets[k];
            adj[k] = JetAdjoint{};
            if (k < n_interior) {
                const CoefficientSet c = model.coefficients(points[k].y);
                PointJet pj{points[k].t, points[k].y, j.value, j.dt, j.grad, j.hess};
                const double R = residual(pj, c);
                J1 += R * R;
                const double w = 2.0 * R / static_cast<double>(n_interior);
                const Vec2 Gg = c.grad_quad * j.grad;
                adj[k].value = w * (c.zeroth_order + j.grad.dot(Gg) / (j.value * j.value));
                adj[k].dt = w;
                adj[k].grad = w * (c.first_order - 2.0 * Gg / j.value);
                adj[k].hess = w * c.second_order;
            } else {
                const double e = j.value - 1.0;
                J2 += e * e;
                adj[k].value = 2.0 * e / static_cast<double>(n_term);
            }
        }
        return J1 / static_cast<double>(n_interior) + (n_term ? J2 / static_cast<double>(n_term) : 0.0);
    };
}

/// Central-difference gradient of the batch loss over every parameter.
inline Eigen::VectorXd fd_param_gradient(const Network& net, std::span<const InputPoint> batch,
                                         const BatchLoss& loss, double h) {
    auto eval = [&](const Network& n) {
        std::vector<NetJet> jets;
        for (const auto& p : batch) jets.push_back(n.jet(p.t, p.y));
        std::vector<JetAdjoint> adj(batch.size());
        return loss(jets, adj);
    };
    Eigen::VectorXd g(net.parameters().size());
    Network probe = net;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double x = net.parameters()[i];
        probe.parameters()[i] = x + h;
        const double up = eval(probe);
        probe.parameters()[i] = x - h;
        const double dn = eval(probe);
        probe.parameters()[i] = x;
        g[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

}  // namespace hjb::oracle
