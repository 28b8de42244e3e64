#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hjb/model.hpp"
#include "hjb/net.hpp"
#include "hjb/pde.hpp"

namespace hjb {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    int n_hidden = 50;
    int n_interior = 1000;
    int n_terminal = 100;
    /// Outer steps between two batch draws.
    int resample_every = 100;
    /// Parameter updates per outer step, all on the current batch.
    int inner_steps = 10;
    double lr_init = 1e-3;
    double lr_decay = 0.96;
    /// Outer steps per learning-rate stage.
    int lr_decay_every = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    long max_outer_steps = 5000;
    std::uint64_t seed = 42;
    OptimizerKind optimizer = OptimizerKind::adam;
    /// Stop once ||theta_{n+1} - theta_n|| drops below this; 0 disables.
    double param_delta_tol = 0.0;

    void validate() const;
    /// lr_init * lr_decay^floor(outer_step / lr_decay_every)
    double learning_rate(long outer_step) const;
};

struct SampleBatch {
    std::vector<InputPoint> interior;
    std::vector<InputPoint> terminal;
};

using Rng = std::mt19937_64;

std::vector<InputPoint> sample_interior(const StateDomain& domain, int n, Rng& rng);
std::vector<InputPoint> sample_terminal(const StateDomain& domain, int n, Rng& rng);
SampleBatch sample_batch(const StateDomain& domain, int n_interior, int n_terminal, Rng& rng);

struct LossValue {
    double J = 0.0;
    double J1 = 0.0;
    double J2 = 0.0;
};

/// J1 = mean squared residual over the interior points, J2 = mean squared
/// terminal misfit. Throws DivisionHazardError on a collapsed output.
LossValue loss(const Network& net, const SampleBatch& batch, const Model& model);

/// Same loss for externally supplied jets (e.g. an analytic candidate).
LossValue loss_from_jets(std::span<const PointJet> interior, const Model& model,
                         std::span<const double> terminal_values);

struct LossGradient {
    LossValue value;
    Eigen::VectorXd grad;
    /// Interior points dropped because |f| < kMinReducedValue.
    std::size_t degenerate = 0;
};

/// Loss and its exact parameter gradient. `coeffs[k]` belongs to
/// batch.interior[k]. With skip_degenerate, interior points with a collapsed
/// output are left out of J1 instead of raising.
LossGradient loss_and_gradient(const Network& net, const SampleBatch& batch,
                               std::span<const CoefficientSet> coeffs, bool skip_degenerate = false);

std::vector<CoefficientSet> batch_coefficients(const Model& model,
                                               std::span<const InputPoint> points);

class Adam {
public:
    Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
    long steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

struct HistoryRow {
    long step = 0;
    double J = 0.0;
    double J1 = 0.0;
    double J2 = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Network net;
    std::vector<HistoryRow> history;
};

/// Deep Galerkin training loop. Throws TrainingAborted if the loss turns
/// non-finite or the output collapses on more than half an interior batch.
TrainResult train(Network net, const TrainConfig& cfg, const Model& model,
                  const StateDomain& domain);

/// Header `step,J,J1,J2,lr`.
void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history);

}  // namespace hjb
