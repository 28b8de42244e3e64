#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjb/errors.hpp"
#include "hjb/model.hpp"
#include "hjb/net.hpp"

namespace hjb {

/// Uniform time-state grid; nt, n1, n2 count intervals (nodes = intervals + 1).
struct Grid3D {
    int nt = 40;
    int n1 = 40;
    int n2 = 40;
    double T = 1.0;
    double y1_lo = -10.0;
    double y1_hi = 10.0;
    double y2_lo = 0.0;
    double y2_hi = 10.0;

    static Grid3D from(const StateDomain& domain, int nt = 40, int n1 = 40, int n2 = 40);
    void validate() const;

    double dt() const { return T / nt; }
    double dy1() const { return (y1_hi - y1_lo) / n1; }
    double dy2() const { return (y2_hi - y2_lo) / n2; }
    double t(int n) const { return n == nt ? T : n * dt(); }
    double y1(int i) const { return i == n1 ? y1_hi : y1_lo + i * dy1(); }
    double y2(int j) const { return j == n2 ? y2_hi : y2_lo + j * dy2(); }

    /// Nodes of one time level, including the boundary shell.
    std::size_t level_size() const { return static_cast<std::size_t>(n1 + 1) * (n2 + 1); }
    /// Unknowns of one time level, (n1 - 1)(n2 - 1).
    std::size_t interior_count() const { return static_cast<std::size_t>(n1 - 1) * (n2 - 1); }
    /// Position of node (i, j) inside a level field (y1-major).
    std::size_t node(int i, int j) const { return static_cast<std::size_t>(i) * (n2 + 1) + j; }
    /// Position of interior node (i, j) in the unknown vector.
    std::size_t unknown(int i, int j) const {
        return static_cast<std::size_t>(i - 1) * (n2 - 1) + (j - 1);
    }
    bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == n1 || j == n2; }
};

/// u[n][i][j], time-major; each level is laid out as Grid3D::node.
class SolutionCube {
public:
    explicit SolutionCube(const Grid3D& grid);

    const Grid3D& grid() const { return grid_; }
    double& at(int n, int i, int j) { return values_[offset(n) + grid_.node(i, j)]; }
    double at(int n, int i, int j) const { return values_[offset(n) + grid_.node(i, j)]; }
    std::span<double> level(int n) { return {values_.data() + offset(n), grid_.level_size()}; }
    std::span<const double> level(int n) const {
        return {values_.data() + offset(n), grid_.level_size()};
    }

private:
    std::size_t offset(int n) const { return static_cast<std::size_t>(n) * grid_.level_size(); }

    Grid3D grid_;
    std::vector<double> values_;
};

/// Values on the spatial boundary shell, u(t, y1, y2).
using BoundaryProvider = std::function<double(double t, double y1, double y2)>;

BoundaryProvider constant_one_boundary();
/// Evaluates a trained network at each level's exact time.
BoundaryProvider network_boundary(Network net);

/// Coefficients C1..C9 of the discrete equation at one interior node:
/// C1, C2 first order; C3, C5 diagonal and C4 twice the off-diagonal second
/// order entry; C6 zeroth order; C7, C8, C9 the gradient quadratic form
/// C7 D1^2 + C8 D1 D2 + C9 D2^2 (the factor q/2 already included).
struct StencilCoefficients {
    double C1 = 0, C2 = 0, C3 = 0, C4 = 0, C5 = 0, C6 = 0, C7 = 0, C8 = 0, C9 = 0;

    static StencilCoefficients from(const CoefficientSet& c);
};

/// One entry per interior node in unknown order.
std::vector<StencilCoefficients> stencil_coefficients(const Grid3D& grid, const Model& model);

/// Discrete equation for every interior node of level n. Both level fields
/// must be complete (boundary shell included).
Eigen::VectorXd stencil_residual(const Grid3D& grid, std::span<const StencilCoefficients> coeffs,
                                 std::span<const double> level_n,
                                 std::span<const double> level_np1);
Eigen::VectorXd stencil_residual(const Grid3D& grid, const Model& model,
                                 std::span<const double> level_n,
                                 std::span<const double> level_np1);

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 20;
    /// Also accept ||F||_inf <= rtol ||u_n||_inf / dt, the round-off floor of
    /// the time difference when u is large. 0 keeps the absolute test only.
    double rtol = 0.0;
};

struct NewtonReport {
    int iterations = 0;
    /// ||F||_inf before the first step and after each step.
    std::vector<double> residual_norms;
    /// Final ||F||_inf <= tol (false when only the rtol test was met).
    bool met_abs_tol = false;
};

class NewtonFailure : public Error {
public:
    NewtonFailure(const std::string& what, int level) : Error(what), level_(level) {}
    /// Time level being solved; -1 when not known.
    int level() const { return level_; }

private:
    int level_;
};

/// Solves level n given level n+1. On entry `level_n` holds the boundary
/// shell and the initial guess; on exit the converged field.
NewtonReport newton_solve_level(const Grid3D& grid, std::span<const StencilCoefficients> coeffs,
                                std::span<const double> level_np1, std::span<double> level_n,
                                const NewtonOptions& opts = {});

struct BackwardResult {
    SolutionCube cube;
    /// Indexed by level; level nt is the terminal condition and has no report.
    std::vector<NewtonReport> reports;
    std::optional<int> failed_level;
    std::string failure;

    std::vector<int> iteration_counts() const;
};

enum class OnNewtonFailure { raise, record };

/// Terminal level set to one, then levels nt-1 .. 0 by Newton with a warm
/// start from the level above. With OnNewtonFailure::record the failing
/// level keeps its last Newton iterate, everything below it is NaN, and the
/// failure is reported in the result instead of thrown.
BackwardResult solve_backward(const Grid3D& grid, const Model& model,
                              const BoundaryProvider& boundary, const NewtonOptions& opts = {},
                              OnNewtonFailure on_failure = OnNewtonFailure::raise);

}  // namespace hjb
