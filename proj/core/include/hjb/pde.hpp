#pragma once

#include "hjb/model.hpp"

namespace hjb {

/// Guard on |u| wherever the reduced equation or the portfolio divides by u.
inline constexpr double kMinReducedValue = 1e-8;

/// Value and derivatives of a candidate reduced value function at (t, y).
struct PointJet {
    double t = 0.0;
    Vec2 y = Vec2::Zero();
    double u = 1.0;
    double du_dt = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
};

/// Left-hand side of the reduced HJB equation for the given jet.
/// Throws DivisionHazardError when |u| < kMinReducedValue.
double residual(const PointJet& jet, const CoefficientSet& coeffs);

/// u(T, y) = 1.
constexpr double terminal_value(const Vec2&) { return 1.0; }

/// V = x^p u / p. Throws DomainError for x <= 0.
double value_from_reduced(double x, double u, double p);

/// Solution exp(c (T - t)) of u_t + c u = 0, u(T) = 1.
double constant_oracle(double t, double c, double T);

}  // namespace hjb
