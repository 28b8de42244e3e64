#pragma once

#include <Eigen/Dense>

#include <string>
#include <variant>

#include "hjb/errors.hpp"

namespace hjb {

class FlatConfig;

/// Dimension of the bundled state process (OU factor, CIR factor).
inline constexpr int kStateDim = 2;

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Market and preference constants of the OU+CIR / Heston instance.
struct ModelParams {
    double theta1 = 0.1646;
    double theta2 = 0.2333;
    double k1 = 0.1301;
    double k2 = 0.0958;
    Mat2 A = (Mat2() << -0.6594, 0.7518, -0.6692, 0.7431).finished();
    double sigma = 0.0724;
    double rho1 = -0.2949;
    double rho2 = -0.2919;
    double r = 0.01;
    double p = 0.0005;
    double T = 1.0;

    /// Conjugate exponent p/(p-1); negative for 0 < p < 1.
    double q() const { return p / (p - 1.0); }

    /// Calibrated S&P500 values with r = 1%, T = 1.
    static ModelParams calibrated(double p = 0.0005);

    void validate() const;
};

/// Sampling / gridding box [0,T] x [y1_lo,y1_hi] x [y2_lo,y2_hi].
struct StateDomain {
    double t_lo = 0.0;
    double t_hi = 1.0;
    double y1_lo = -10.0;
    double y1_hi = 10.0;
    double y2_lo = 0.0;
    double y2_hi = 10.0;
    /// Lower clamp applied to y2 wherever sqrt(y2) or 1/y2 is evaluated.
    double y2_floor = 1e-2;

    void validate() const;
    bool contains(double t, const Vec2& y) const;
};

/// Pointwise coefficients of the reduced equation
///   u_t + first.grad + sum_ij second_ij u_ij + zeroth u - grad.G.grad / u = 0.
template <int D>
struct CoefficientSetT {
    Eigen::Matrix<double, D, 1> first_order = Eigen::Matrix<double, D, 1>::Zero();
    /// (1/2) a a^T
    Eigen::Matrix<double, D, D> second_order = Eigen::Matrix<double, D, D>::Zero();
    double zeroth_order = 0.0;
    /// (q/2) Upsilon^T Sigma^{-1} Upsilon
    Eigen::Matrix<double, D, D> grad_quad = Eigen::Matrix<double, D, D>::Zero();
};

using CoefficientSet = CoefficientSetT<kStateDim>;

/// Generic (d, n) assembly of the reduced-equation coefficients from the
/// state drift b, state diffusion a, excess return mu, return covariance
/// Sigma and return/state covariance Upsilon.
template <int D, int N>
CoefficientSetT<D> assemble_coefficients(const Eigen::Matrix<double, D, 1>& b,
                                         const Eigen::Matrix<double, D, D>& a,
                                         const Eigen::Matrix<double, N, 1>& mu,
                                         const Eigen::Matrix<double, N, N>& Sigma,
                                         const Eigen::Matrix<double, N, D>& Upsilon,
                                         double p, double r, double sigma_eps = 1e-12) {
    const double q = p / (p - 1.0);
    Eigen::LDLT<Eigen::Matrix<double, N, N>> ldlt(Sigma);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() < sigma_eps) {
        throw SingularSigmaError("return covariance is singular");
    }
    const Eigen::Matrix<double, N, 1> Sinv_mu = ldlt.solve(mu);
    const Eigen::Matrix<double, N, D> Sinv_U = ldlt.solve(Upsilon);

    CoefficientSetT<D> c;
    c.first_order = b - q * (mu.transpose() * Sinv_U).transpose();
    c.second_order = 0.5 * a * a.transpose();
    c.zeroth_order = p * r - 0.5 * q * mu.dot(Sinv_mu);
    Eigen::Matrix<double, D, D> gq = 0.5 * q * (Upsilon.transpose() * Sinv_U);
    c.grad_quad = 0.5 * (gq + gq.transpose());
    return c;
}

enum class Clamp { on, off };

/// Return moments for a single risky asset (n = 1).
struct ReturnMoments {
    double mu = 0.0;
    double Sigma = 0.0;
    Eigen::RowVector2d upsilon = Eigen::RowVector2d::Zero();
};

/// OU factor y1 (return drift) and CIR factor y2 (return variance) driving a
/// Heston-type excess return.
class HestonModel {
public:
    explicit HestonModel(const ModelParams& params, double y2_floor = 1e-2,
                         double sigma_eps = 1e-12);

    const ModelParams& params() const { return params_; }
    double y2_floor() const { return y2_floor_; }
    /// A A^T, fixed for the lifetime of the model.
    const Mat2& loading_gram() const { return gram_; }

    Vec2 drift(const Vec2& y) const;
    /// diag(1, sqrt(y2)) A. With Clamp::off a negative y2 raises DomainError.
    Mat2 diffusion(const Vec2& y, Clamp clamp = Clamp::on) const;
    ReturnMoments return_moments(const Vec2& y) const;
    CoefficientSet coefficients(const Vec2& y) const;

private:
    ModelParams params_;
    double y2_floor_;
    double sigma_eps_;
    Mat2 gram_;
};

struct ConstantModelParams {
    double mu = 0.0;
    double Sigma = 1.0;
    double p = 0.5;
    double r = 0.01;
    double T = 1.0;
    Vec2 drift = Vec2::Zero();
    Mat2 diffusion = Mat2::Zero();
};

/// Frozen return moments with zero return/state correlation. The solution of
/// the reduced equation is then exp(c (T - t)) with c = zeroth_order.
class ConstantModel {
public:
    explicit ConstantModel(const ConstantModelParams& params);

    const ConstantModelParams& params() const { return params_; }
    double rate() const { return coeffs_.zeroth_order; }

    Vec2 drift(const Vec2&) const { return params_.drift; }
    Mat2 diffusion(const Vec2&, Clamp = Clamp::on) const { return params_.diffusion; }
    ReturnMoments return_moments(const Vec2&) const;
    CoefficientSet coefficients(const Vec2&) const { return coeffs_; }

private:
    ConstantModelParams params_;
    CoefficientSet coeffs_;
};

/// Either bundled model behind one interface.
class Model {
public:
    Model(HestonModel m) : impl_(std::move(m)) {}
    Model(ConstantModel m) : impl_(std::move(m)) {}

    CoefficientSet coefficients(const Vec2& y) const;
    ReturnMoments return_moments(const Vec2& y) const;
    Vec2 drift(const Vec2& y) const;
    Mat2 diffusion(const Vec2& y, Clamp clamp = Clamp::on) const;

    double p() const;
    double r() const;
    double T() const;
    double q() const { return p() / (p() - 1.0); }
    std::string name() const;

    const HestonModel* heston() const { return std::get_if<HestonModel>(&impl_); }
    const ConstantModel* constant() const { return std::get_if<ConstantModel>(&impl_); }

private:
    std::variant<HestonModel, ConstantModel> impl_;
};

/// Keys: theta1 theta2 k1 k2 a11 a12 a21 a22 sigma rho1 rho2 r p T.
ModelParams model_params_from(const FlatConfig& cfg);
/// Keys: T y1_lo y1_hi y2_lo y2_hi y2_floor.
StateDomain state_domain_from(const FlatConfig& cfg);
/// `model: heston` (default) or `model: constant` with const_mu, const_sigma2.
Model model_from(const FlatConfig& cfg);

}  // namespace hjb
