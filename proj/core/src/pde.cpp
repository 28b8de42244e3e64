#include "hjb/pde.hpp"

#include <cmath>

namespace hjb {

double residual(const PointJet& jet, const CoefficientSet& c) {
    if (!(std::abs(jet.u) >= kMinReducedValue))
        throw DivisionHazardError("reduced value |u| below 1e-8 in residual");
    const double trace_term = (c.second_order.array() * jet.hess.array()).sum();
    const double quad = jet.grad.dot(c.grad_quad * jet.grad);
    return jet.du_dt + c.first_order.dot(jet.grad) + trace_term + c.zeroth_order * jet.u -
           quad / jet.u;
}

double value_from_reduced(double x, double u, double p) {
    if (!(x > 0.0)) throw DomainError("wealth must be positive");
    return std::pow(x, p) * u / p;
}

double constant_oracle(double t, double c, double T) { return std::exp(c * (T - t)); }

}  // namespace hjb
