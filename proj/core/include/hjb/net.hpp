#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "hjb/model.hpp"

namespace hjb {

/// Affine map of the raw inputs (t, y1, y2) onto [-1, 1]^3. Part of the
/// network: every derivative below is taken with respect to the raw inputs.
struct InputScaling {
    std::array<double, 3> lo{-1.0, -1.0, -1.0};
    std::array<double, 3> hi{1.0, 1.0, 1.0};

    static InputScaling identity() { return {}; }
    static InputScaling from(const StateDomain& domain);

    /// 2 / (hi - lo); 1 on a degenerate axis.
    double scale(int k) const;
    double offset(int k) const;
};

struct InputPoint {
    double t = 0.0;
    Vec2 y = Vec2::Zero();
};

struct InputDerivatives {
    double dt = 0.0;
    Vec2 dy = Vec2::Zero();
};

/// f, df/dt, grad_y f and hess_y f at one input.
struct NetJet {
    double value = 0.0;
    double dt = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
};

/// Sensitivities dL/d(jet entries) of a scalar loss; the seeds of the
/// reverse pass into the parameters.
struct JetAdjoint {
    double value = 0.0;
    double dt = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
};

/// Per-neuron tanh and its first three derivatives, kept from the forward
/// pass so the reverse pass does not re-evaluate tanh.
struct NeuronCache {
    std::vector<double> act, d1, d2;
};

/// Single hidden layer tanh network
///   f(t, y) = c + sum_i beta_i tanh(W_i . z(t, y) + b_i),
/// z the scaled input. Parameters live in one flat vector laid out as
/// [W row-major (n x 3) | b (n) | beta (n) | c].
class Network {
public:
    static constexpr int kInputs = 1 + kStateDim;

    explicit Network(int n_hidden, const InputScaling& scaling = InputScaling::identity());

    /// Uniform fan-based (Glorot) weights, zero biases, deterministic in seed.
    static Network init(int n_hidden, std::uint64_t seed,
                        const InputScaling& scaling = InputScaling::identity());

    static std::size_t parameter_count(int n_hidden) {
        return static_cast<std::size_t>(n_hidden) * (kInputs + 2) + 1;
    }

    int hidden() const { return n_hidden_; }
    std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }
    const InputScaling& scaling() const { return scaling_; }

    Eigen::VectorXd& parameters() { return theta_; }
    const Eigen::VectorXd& parameters() const { return theta_; }

    double& W(int i, int k) { return theta_[i * kInputs + k]; }
    double W(int i, int k) const { return theta_[i * kInputs + k]; }
    double& bias(int i) { return theta_[n_hidden_ * kInputs + i]; }
    double bias(int i) const { return theta_[n_hidden_ * kInputs + i]; }
    double& beta(int i) { return theta_[n_hidden_ * (kInputs + 1) + i]; }
    double beta(int i) const { return theta_[n_hidden_ * (kInputs + 1) + i]; }
    double& output_bias() { return theta_[n_hidden_ * (kInputs + 2)]; }
    double output_bias() const { return theta_[n_hidden_ * (kInputs + 2)]; }

    double forward(double t, const Vec2& y) const;
    InputDerivatives input_gradient(double t, const Vec2& y) const;
    /// y-block of the input Hessian.
    Mat2 input_hessian(double t, const Vec2& y) const;
    NetJet jet(double t, const Vec2& y) const;
    NetJet jet(double t, const Vec2& y, NeuronCache& cache) const;

    /// Adds d/dtheta [adj.value f + adj.dt f_t + adj.grad . grad f + <adj.hess, hess f>]
    /// at (t, y) into `out`. `cache` must come from jet() at the same point.
    void accumulate_param_gradient(double t, const Vec2& y, const JetAdjoint& adj,
                                   const NeuronCache& cache, std::span<double> out) const;
    void accumulate_param_gradient(double t, const Vec2& y, const JetAdjoint& adj,
                                   std::span<double> out) const;

    /// Text format: "n_hidden d t_lo t_hi y1_lo y1_hi y2_lo y2_hi" then one
    /// parameter per line in the flat layout above.
    void save(const std::filesystem::path& path) const;
    static Network load(const std::filesystem::path& path);

private:
    std::array<double, kInputs> scaled(double t, const Vec2& y) const;

    int n_hidden_;
    InputScaling scaling_;
    Eigen::VectorXd theta_;
};

/// Scalar loss over a batch of jets. Returns the loss and fills one adjoint
/// per jet.
using BatchLoss = std::function<double(std::span<const NetJet>, std::span<JetAdjoint>)>;

/// Exact gradient of `loss` with respect to every network parameter.
/// Throws NonFiniteError when the loss or any gradient entry is not finite.
Eigen::VectorXd loss_param_gradient(const Network& net, std::span<const InputPoint> batch,
                                    const BatchLoss& loss, double* loss_value = nullptr);

}  // namespace hjb
