#pragma once

#include "hjb/fdm.hpp"
#include "hjb/model.hpp"
#include "hjb/net.hpp"

namespace hjb {

/// Reduced value u and its state gradient at one point.
struct SurfaceSample {
    double u = 1.0;
    Vec2 grad = Vec2::Zero();
};

/// A solved reduced value function queried by the portfolio formula.
class SolvedSurface {
public:
    virtual ~SolvedSurface() = default;
    virtual SurfaceSample sample(double t, const Vec2& y) const = 0;
};

/// Trained network with its analytic input gradient.
class NetworkSurface final : public SolvedSurface {
public:
    explicit NetworkSurface(Network net) : net_(std::move(net)) {}
    SurfaceSample sample(double t, const Vec2& y) const override;
    const Network& network() const { return net_; }

private:
    Network net_;
};

/// FDM cube: linear in time between levels, bilinear in space. Gradients are
/// central differences at the nodes (one-sided on the grid edge), then
/// interpolated the same way as the values.
class CubeSurface final : public SolvedSurface {
public:
    explicit CubeSurface(SolutionCube cube) : cube_(std::move(cube)) {}
    SurfaceSample sample(double t, const Vec2& y) const override;
    const SolutionCube& cube() const { return cube_; }

private:
    SurfaceSample node_sample(int n, int i, int j) const;
    SurfaceSample level_sample(int n, const Vec2& y) const;

    SolutionCube cube_;
};

/// Risky-asset weight (Sigma^{-1} mu + Sigma^{-1} Upsilon grad u / u) / (1 - p).
/// Throws DegenerateSurfaceError when u < 1e-8.
double optimal_weight(double t, const Vec2& y, const SolvedSurface& surface, const Model& model);
/// Same formula from an explicit sample.
double optimal_weight(const Vec2& y, const SurfaceSample& s, const Model& model);

/// Wealth derivatives of a value function V(t, x, y).
struct ValueDerivatives {
    double V_x = 0.0;
    double V_xx = 0.0;
    /// grad_y V_x
    Vec2 grad_y_V_x = Vec2::Zero();
};

/// -(1 / (x V_xx)) Sigma^{-1} (mu V_x + Upsilon grad_y V_x).
/// Throws DomainError for x <= 0 and ConvexityError for V_xx >= 0.
double unreduced_weight(double x, const Vec2& y, const ValueDerivatives& dv, const Model& model);

}  // namespace hjb
