#include "hjb/dgm.hpp"

#include <cmath>
#include <sstream>

#include "hjb/csv.hpp"
#include "hjb/errors.hpp"

namespace hjb {

namespace {

// Fixed partition of the interior batch; per-chunk partial gradients are
// summed in chunk order so results do not depend on the thread count.
constexpr std::size_t kChunk = 64;

double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

}  // namespace

void TrainConfig::validate() const {
    if (n_hidden < 1 || n_interior < 1 || n_terminal < 1 || resample_every < 1 ||
        inner_steps < 1 || lr_decay_every < 1)
        throw ConfigError("training counts must be >= 1");
    if (max_outer_steps < 0) throw ConfigError("max_outer_steps must be >= 0");
    if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("lr_decay must lie in (0,1)");
    if (!(lr_init >= 0.0)) throw ConfigError("lr_init must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("Adam moment factors must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    if (!(param_delta_tol >= 0.0)) throw ConfigError("param_delta_tol must be >= 0");
}

double TrainConfig::learning_rate(long outer_step) const {
    return lr_init * std::pow(lr_decay, static_cast<double>(outer_step / lr_decay_every));
}

std::vector<InputPoint> sample_interior(const StateDomain& d, int n, Rng& rng) {
    std::vector<InputPoint> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) {
        p.t = uniform(rng, d.t_lo, d.t_hi);
        p.y[0] = uniform(rng, d.y1_lo, d.y1_hi);
        p.y[1] = uniform(rng, d.y2_lo, d.y2_hi);
    }
    return pts;
}

std::vector<InputPoint> sample_terminal(const StateDomain& d, int n, Rng& rng) {
    std::vector<InputPoint> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) {
        p.t = d.t_hi;
        p.y[0] = uniform(rng, d.y1_lo, d.y1_hi);
        p.y[1] = uniform(rng, d.y2_lo, d.y2_hi);
    }
    return pts;
}

SampleBatch sample_batch(const StateDomain& d, int n_interior, int n_terminal, Rng& rng) {
    SampleBatch b;
    b.interior = sample_interior(d, n_interior, rng);
    b.terminal = sample_terminal(d, n_terminal, rng);
    return b;
}

std::vector<CoefficientSet> batch_coefficients(const Model& model,
                                               std::span<const InputPoint> points) {
    std::vector<CoefficientSet> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(model.coefficients(p.y));
    return out;
}

LossValue loss_from_jets(std::span<const PointJet> interior, const Model& model,
                         std::span<const double> terminal_values) {
    if (interior.empty() || terminal_values.empty())
        throw DomainError("loss needs non-empty interior and terminal sets");
    LossValue L;
    for (const auto& jet : interior) {
        const double R = residual(jet, model.coefficients(jet.y));
        L.J1 += R * R;
    }
    L.J1 /= static_cast<double>(interior.size());
    for (double f : terminal_values) L.J2 += (f - 1.0) * (f - 1.0);
    L.J2 /= static_cast<double>(terminal_values.size());
    L.J = L.J1 + L.J2;
    return L;
}

LossValue loss(const Network& net, const SampleBatch& batch, const Model& model) {
    std::vector<PointJet> jets;
    jets.reserve(batch.interior.size());
    for (const auto& p : batch.interior) {
        const NetJet nj = net.jet(p.t, p.y);
        jets.push_back({p.t, p.y, nj.value, nj.dt, nj.grad, nj.hess});
    }
    std::vector<double> term;
    term.reserve(batch.terminal.size());
    for (const auto& p : batch.terminal) term.push_back(net.forward(p.t, p.y));
    return loss_from_jets(jets, model, term);
}

LossGradient loss_and_gradient(const Network& net, const SampleBatch& batch,
                               std::span<const CoefficientSet> coeffs, bool skip_degenerate) {
    const std::size_t n_int = batch.interior.size();
    const std::size_t n_ter = batch.terminal.size();
    if (n_int == 0 || n_ter == 0) throw DomainError("loss needs non-empty interior and terminal sets");
    if (coeffs.size() != n_int) throw DomainError("one coefficient set per interior point required");

    const std::size_t P = net.size();
    const std::size_t n_chunks = (n_int + kChunk - 1) / kChunk;

    // One partial gradient per chunk, seeded with dJ1/dR = 2R; the 1/N
    // normalisation is applied after the reduction because N counts only the
    // points whose output did not collapse.
    std::vector<double> partial(n_chunks * P, 0.0);
    std::vector<double> chunk_sq(n_chunks, 0.0);
    std::vector<std::size_t> chunk_bad(n_chunks, 0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
        NeuronCache cache;
        std::span<double> g(partial.data() + c * P, P);
        const std::size_t end = std::min(n_int, (c + 1) * kChunk);
        for (std::size_t k = c * kChunk; k < end; ++k) {
            const auto& p = batch.interior[k];
            const NetJet j = net.jet(p.t, p.y, cache);
            if (!(std::abs(j.value) >= kMinReducedValue)) {
                ++chunk_bad[c];
                continue;
            }
            const CoefficientSet& cs = coeffs[k];
            const double R = residual(PointJet{p.t, p.y, j.value, j.dt, j.grad, j.hess}, cs);
            chunk_sq[c] += R * R;
            const Vec2 Gg = cs.grad_quad * j.grad;
            const double quad = j.grad.dot(Gg);
            const double w = 2.0 * R;
            JetAdjoint adj;
            adj.value = w * (cs.zeroth_order + quad / (j.value * j.value));
            adj.dt = w;
            adj.grad = w * (cs.first_order - (2.0 / j.value) * Gg);
            adj.hess = w * cs.second_order;
            net.accumulate_param_gradient(p.t, p.y, adj, cache, g);
        }
    }

    std::size_t degenerate = 0;
    for (std::size_t b : chunk_bad) degenerate += b;
    if (degenerate && !skip_degenerate)
        throw DivisionHazardError("network output |f| below 1e-8 at an interior point");
    const std::size_t used = n_int - degenerate;

    LossGradient out;
    out.degenerate = degenerate;
    out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
    for (std::size_t c = 0; c < n_chunks; ++c) {
        out.value.J1 += chunk_sq[c];
        out.grad += Eigen::Map<const Eigen::VectorXd>(partial.data() + c * P,
                                                      static_cast<Eigen::Index>(P));
    }
    if (used > 0) {
        out.value.J1 /= static_cast<double>(used);
        out.grad /= static_cast<double>(used);
    }

    // Terminal term.
    {
        NeuronCache cache;
        std::span<double> g(out.grad.data(), P);
        const double inv_m = 1.0 / static_cast<double>(n_ter);
        for (const auto& p : batch.terminal) {
            const NetJet j = net.jet(p.t, p.y, cache);
            const double e = j.value - terminal_value(p.y);
            out.value.J2 += e * e;
            JetAdjoint adj;
            adj.value = 2.0 * e * inv_m;
            net.accumulate_param_gradient(p.t, p.y, adj, cache, g);
        }
        out.value.J2 *= inv_m;
    }
    out.value.J = out.value.J1 + out.value.J2;
    if (!std::isfinite(out.value.J)) throw NonFiniteError("DGM loss is not finite");
    if (!out.grad.allFinite()) throw NonFiniteError("DGM loss gradient is not finite");
    return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

// ---------------------------------------------------------------------------

TrainResult train(Network net, const TrainConfig& cfg, const Model& model,
                  const StateDomain& domain) {
    cfg.validate();
    TrainResult result{std::move(net), {}};
    Network& f = result.net;
    if (cfg.max_outer_steps == 0) return result;

    Rng rng(cfg.seed);
    Adam adam(f.size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    SampleBatch batch;
    std::vector<CoefficientSet> coeffs;
    result.history.reserve(static_cast<std::size_t>(cfg.max_outer_steps * cfg.inner_steps));

    long update = 0;
    for (long outer = 0; outer < cfg.max_outer_steps; ++outer) {
        if (outer % cfg.resample_every == 0) {
            batch = sample_batch(domain, cfg.n_interior, cfg.n_terminal, rng);
            coeffs = batch_coefficients(model, batch.interior);
        }
        const double lr = cfg.learning_rate(outer);
        for (int inner = 0; inner < cfg.inner_steps; ++inner, ++update) {
            LossGradient lg;
            try {
                lg = loss_and_gradient(f, batch, coeffs, true);
            } catch (const NonFiniteError& e) {
                std::ostringstream os;
                os << "training aborted at update " << update << ": " << e.what();
                throw TrainingAborted(os.str());
            }
            if (2 * lg.degenerate > batch.interior.size()) {
                std::ostringstream os;
                os << "training aborted at update " << update << ": network output collapsed on "
                   << lg.degenerate << " of " << batch.interior.size() << " interior points";
                throw TrainingAborted(os.str());
            }
            result.history.push_back({update, lg.value.J, lg.value.J1, lg.value.J2, lr});

            const Eigen::VectorXd before = f.parameters();
            if (cfg.optimizer == OptimizerKind::adam) {
                adam.step(f.parameters(), lg.grad, lr);
            } else {
                f.parameters() -= lr * lg.grad;
            }
            if (cfg.param_delta_tol > 0.0 &&
                (f.parameters() - before).norm() < cfg.param_delta_tol)
                return result;
        }
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history) {
    CsvTable t;
    t.header = {"step", "J", "J1", "J2", "lr"};
    t.rows.reserve(history.size());
    for (const auto& h : history) {
        t.rows.push_back({std::to_string(h.step), format_double(h.J), format_double(h.J1),
                          format_double(h.J2), format_double(h.lr)});
    }
    t.write(path);
}

}  // namespace hjb
