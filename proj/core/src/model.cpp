#include "hjb/model.hpp"

#include <cmath>

#include "hjb/config.hpp"

namespace hjb {

namespace {

bool all_finite(std::initializer_list<double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

ModelParams ModelParams::calibrated(double p) {
    ModelParams m;
    m.p = p;
    return m;
}

void ModelParams::validate() const {
    if (!all_finite({theta1, theta2, k1, k2, sigma, rho1, rho2, r, p, T}) || !A.allFinite())
        throw ConfigError("model parameters must be finite");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("utility exponent p must lie in (0,1)");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(T > 0.0)) throw ConfigError("horizon T must be positive");
    if (std::abs(rho1) > 1.0 || std::abs(rho2) > 1.0)
        throw ConfigError("correlations rho1, rho2 must lie in [-1,1]");
}

void StateDomain::validate() const {
    if (!all_finite({t_lo, t_hi, y1_lo, y1_hi, y2_lo, y2_hi, y2_floor}))
        throw ConfigError("domain bounds must be finite");
    if (!(t_lo < t_hi)) throw ConfigError("domain requires t_lo < t_hi");
    if (!(y1_lo < y1_hi)) throw ConfigError("domain requires y1_lo < y1_hi");
    if (!(y2_lo < y2_hi)) throw ConfigError("domain requires y2_lo < y2_hi");
    if (!(y2_floor > 0.0 && y2_floor <= y2_hi))
        throw ConfigError("domain requires 0 < y2_floor <= y2_hi");
}

bool StateDomain::contains(double t, const Vec2& y) const {
    return t >= t_lo && t <= t_hi && y[0] >= y1_lo && y[0] <= y1_hi && y[1] >= y2_lo &&
           y[1] <= y2_hi;
}

// ---------------------------------------------------------------------------

HestonModel::HestonModel(const ModelParams& params, double y2_floor, double sigma_eps)
    : params_(params), y2_floor_(y2_floor), sigma_eps_(sigma_eps) {
    params_.validate();
    if (!(y2_floor > 0.0)) throw ConfigError("y2_floor must be positive");
    gram_ = params_.A * params_.A.transpose();
}

Vec2 HestonModel::drift(const Vec2& y) const {
    return {params_.theta1 * (params_.k1 - y[0]), params_.theta2 * (params_.k2 - y[1])};
}

Mat2 HestonModel::diffusion(const Vec2& y, Clamp clamp) const {
    double y2 = y[1];
    if (clamp == Clamp::on) {
        y2 = std::max(y2, y2_floor_);
    } else if (y2 < 0.0) {
        throw DomainError("diffusion evaluated at negative variance factor y2");
    }
    Mat2 a = params_.A;
    a.row(1) *= std::sqrt(y2);
    return a;
}

ReturnMoments HestonModel::return_moments(const Vec2& y) const {
    const double y2 = std::max(y[1], y2_floor_);
    const double s2 = params_.sigma * params_.sigma * y2;
    if (!(s2 >= sigma_eps_)) throw SingularSigmaError("sigma^2 * y2 below singularity threshold");
    const Mat2 a = diffusion(y);
    const Eigen::RowVector2d rho(params_.rho1, params_.rho2);
    ReturnMoments m;
    m.mu = y[0];
    m.Sigma = s2;
    m.upsilon = params_.sigma * std::sqrt(y2) * rho * a.transpose();
    return m;
}

CoefficientSet HestonModel::coefficients(const Vec2& y) const {
    const ModelParams& P = params_;
    const double y2 = std::max(y[1], y2_floor_);
    const double sy2 = std::sqrt(y2);
    const double s2 = P.sigma * P.sigma * y2;
    if (!(s2 >= sigma_eps_)) throw SingularSigmaError("sigma^2 * y2 below singularity threshold");
    const double q = P.q();
    const double mu = y[0];

    // Upsilon = sigma sqrt(y2) rho a^T with a = diag(1, sqrt(y2)) A.
    const double ups1 = P.sigma * sy2 * (P.rho1 * P.A(0, 0) + P.rho2 * P.A(0, 1));
    const double ups2 = P.sigma * y2 * (P.rho1 * P.A(1, 0) + P.rho2 * P.A(1, 1));

    CoefficientSet c;
    const Vec2 b = drift(y);
    const double mu_over_s2 = mu / s2;
    c.first_order = {b[0] - q * mu_over_s2 * ups1, b[1] - q * mu_over_s2 * ups2};
    c.second_order << 0.5 * gram_(0, 0), 0.5 * sy2 * gram_(0, 1), 0.5 * sy2 * gram_(0, 1),
        0.5 * y2 * gram_(1, 1);
    c.zeroth_order = P.p * P.r - 0.5 * q * mu * mu / s2;
    const double h = 0.5 * q / s2;
    c.grad_quad << h * ups1 * ups1, h * ups1 * ups2, h * ups1 * ups2, h * ups2 * ups2;
    return c;
}

// ---------------------------------------------------------------------------

ConstantModel::ConstantModel(const ConstantModelParams& params) : params_(params) {
    if (!(params.p > 0.0 && params.p < 1.0)) throw ConfigError("utility exponent p must lie in (0,1)");
    if (!(params.T > 0.0)) throw ConfigError("horizon T must be positive");
    if (!(params.Sigma > 0.0)) throw SingularSigmaError("constant return variance must be positive");
    using M1 = Eigen::Matrix<double, 1, 1>;
    coeffs_ = assemble_coefficients<kStateDim, 1>(params.drift, params.diffusion, M1(params.mu),
                                                  M1(params.Sigma),
                                                  Eigen::Matrix<double, 1, 2>::Zero(), params.p,
                                                  params.r);
}

ReturnMoments ConstantModel::return_moments(const Vec2&) const {
    ReturnMoments m;
    m.mu = params_.mu;
    m.Sigma = params_.Sigma;
    return m;
}

// ---------------------------------------------------------------------------

CoefficientSet Model::coefficients(const Vec2& y) const {
    return std::visit([&](const auto& m) { return m.coefficients(y); }, impl_);
}

ReturnMoments Model::return_moments(const Vec2& y) const {
    return std::visit([&](const auto& m) { return m.return_moments(y); }, impl_);
}

Vec2 Model::drift(const Vec2& y) const {
    return std::visit([&](const auto& m) { return m.drift(y); }, impl_);
}

Mat2 Model::diffusion(const Vec2& y, Clamp clamp) const {
    return std::visit([&](const auto& m) { return m.diffusion(y, clamp); }, impl_);
}

double Model::p() const {
    if (auto h = heston()) return h->params().p;
    return constant()->params().p;
}

double Model::r() const {
    if (auto h = heston()) return h->params().r;
    return constant()->params().r;
}

double Model::T() const {
    if (auto h = heston()) return h->params().T;
    return constant()->params().T;
}

std::string Model::name() const { return heston() ? "heston" : "constant"; }

// ---------------------------------------------------------------------------

ModelParams model_params_from(const FlatConfig& cfg) {
    ModelParams m;
    m.theta1 = cfg.get_double("theta1");
    m.theta2 = cfg.get_double("theta2");
    m.k1 = cfg.get_double("k1");
    m.k2 = cfg.get_double("k2");
    m.A << cfg.get_double("a11"), cfg.get_double("a12"), cfg.get_double("a21"),
        cfg.get_double("a22");
    m.sigma = cfg.get_double("sigma");
    m.rho1 = cfg.get_double("rho1");
    m.rho2 = cfg.get_double("rho2");
    m.r = cfg.get_double("r");
    m.p = cfg.get_double("p");
    m.T = cfg.get_double("T");
    m.validate();
    return m;
}

StateDomain state_domain_from(const FlatConfig& cfg) {
    StateDomain d;
    d.t_hi = cfg.get_double("T");
    d.y1_lo = cfg.get_double("y1_lo");
    d.y1_hi = cfg.get_double("y1_hi");
    d.y2_lo = cfg.get_double("y2_lo");
    d.y2_hi = cfg.get_double("y2_hi");
    d.y2_floor = cfg.get_double("y2_floor");
    d.validate();
    return d;
}

Model model_from(const FlatConfig& cfg) {
    const std::string kind = cfg.get_string("model", "heston");
    const double floor = cfg.get_double("y2_floor", 1e-2);
    if (kind == "heston") return HestonModel(model_params_from(cfg), floor);
    if (kind == "constant") {
        ConstantModelParams c;
        c.mu = cfg.get_double("const_mu");
        c.Sigma = cfg.get_double("const_sigma2");
        c.p = cfg.get_double("p");
        c.r = cfg.get_double("r");
        c.T = cfg.get_double("T");
        return ConstantModel(c);
    }
    throw ConfigError("unknown model '" + kind + "' (expected heston or constant)");
}

}  // namespace hjb
