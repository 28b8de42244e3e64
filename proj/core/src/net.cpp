#include "hjb/net.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "hjb/csv.hpp"
#include "hjb/errors.hpp"

namespace hjb {

InputScaling InputScaling::from(const StateDomain& d) {
    InputScaling s;
    s.lo = {d.t_lo, d.y1_lo, d.y2_lo};
    s.hi = {d.t_hi, d.y1_hi, d.y2_hi};
    return s;
}

double InputScaling::scale(int k) const {
    const double w = hi[k] - lo[k];
    return w > 0.0 ? 2.0 / w : 1.0;
}

double InputScaling::offset(int k) const {
    const double w = hi[k] - lo[k];
    return w > 0.0 ? -(hi[k] + lo[k]) / w : -lo[k];
}

Network::Network(int n_hidden, const InputScaling& scaling)
    : n_hidden_(n_hidden), scaling_(scaling) {
    if (n_hidden < 1) throw ConfigError("network needs at least one hidden neuron");
    theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count(n_hidden)));
}

Network Network::init(int n_hidden, std::uint64_t seed, const InputScaling& scaling) {
    Network net(n_hidden, scaling);
    std::mt19937_64 rng(seed);
    const double s_in = std::sqrt(6.0 / (kInputs + n_hidden));
    const double s_out = std::sqrt(6.0 / (n_hidden + 1));
    std::uniform_real_distribution<double> in(-s_in, s_in);
    std::uniform_real_distribution<double> out(-s_out, s_out);
    for (int i = 0; i < n_hidden; ++i)
        for (int k = 0; k < kInputs; ++k) net.W(i, k) = in(rng);
    for (int i = 0; i < n_hidden; ++i) net.beta(i) = out(rng);
    return net;
}

std::array<double, Network::kInputs> Network::scaled(double t, const Vec2& y) const {
    return {scaling_.scale(0) * t + scaling_.offset(0), scaling_.scale(1) * y[0] + scaling_.offset(1),
            scaling_.scale(2) * y[1] + scaling_.offset(2)};
}

double Network::forward(double t, const Vec2& y) const {
    const auto z = scaled(t, y);
    double f = output_bias();
    for (int i = 0; i < n_hidden_; ++i) {
        const double h = W(i, 0) * z[0] + W(i, 1) * z[1] + W(i, 2) * z[2] + bias(i);
        f += beta(i) * std::tanh(h);
    }
    return f;
}

InputDerivatives Network::input_gradient(double t, const Vec2& y) const {
    const NetJet j = jet(t, y);
    return {j.dt, j.grad};
}

Mat2 Network::input_hessian(double t, const Vec2& y) const { return jet(t, y).hess; }

NetJet Network::jet(double t, const Vec2& y) const {
    NeuronCache cache;
    return jet(t, y, cache);
}

NetJet Network::jet(double t, const Vec2& y, NeuronCache& cache) const {
    const auto z = scaled(t, y);
    const double s0 = scaling_.scale(0), s1 = scaling_.scale(1), s2 = scaling_.scale(2);
    cache.act.resize(n_hidden_);
    cache.d1.resize(n_hidden_);
    cache.d2.resize(n_hidden_);

    NetJet j;
    j.value = output_bias();
    double h11 = 0.0, h12 = 0.0, h22 = 0.0;
    for (int i = 0; i < n_hidden_; ++i) {
        const double w0 = W(i, 0), w1 = W(i, 1), w2 = W(i, 2);
        const double a = std::tanh(w0 * z[0] + w1 * z[1] + w2 * z[2] + bias(i));
        const double a1 = 1.0 - a * a;
        const double a2 = -2.0 * a * a1;
        cache.act[i] = a;
        cache.d1[i] = a1;
        cache.d2[i] = a2;

        const double b = beta(i);
        // effective weights on the raw inputs
        const double v0 = w0 * s0, v1 = w1 * s1, v2 = w2 * s2;
        j.value += b * a;
        const double g = b * a1;
        j.dt += g * v0;
        j.grad[0] += g * v1;
        j.grad[1] += g * v2;
        const double hcoef = b * a2;
        h11 += hcoef * v1 * v1;
        h12 += hcoef * v1 * v2;
        h22 += hcoef * v2 * v2;
    }
    j.hess << h11, h12, h12, h22;
    return j;
}

void Network::accumulate_param_gradient(double t, const Vec2& y, const JetAdjoint& adj,
                                        std::span<double> out) const {
    NeuronCache cache;
    jet(t, y, cache);
    accumulate_param_gradient(t, y, adj, cache, out);
}

void Network::accumulate_param_gradient(double t, const Vec2& y, const JetAdjoint& adj,
                                        const NeuronCache& cache, std::span<double> out) const {
    const auto z = scaled(t, y);
    const double s[kInputs] = {scaling_.scale(0), scaling_.scale(1), scaling_.scale(2)};
    const double om_f = adj.value, om_t = adj.dt;
    const double om_g1 = adj.grad[0], om_g2 = adj.grad[1];
    // symmetrised Hessian seed: dQ/dv_j = sum_k (Om_jk + Om_kj) v_k
    const double S11 = 2.0 * adj.hess(0, 0), S22 = 2.0 * adj.hess(1, 1);
    const double S12 = adj.hess(0, 1) + adj.hess(1, 0);

    double* dW = out.data();
    double* db = dW + n_hidden_ * kInputs;
    double* dbeta = db + n_hidden_;
    double* dc = dbeta + n_hidden_;

    for (int i = 0; i < n_hidden_; ++i) {
        const double a = cache.act[i], a1 = cache.d1[i], a2 = cache.d2[i];
        const double a3 = -2.0 * (a1 * a1 + a * a2);
        const double v0 = W(i, 0) * s[0], v1 = W(i, 1) * s[1], v2 = W(i, 2) * s[2];

        const double L = om_t * v0 + om_g1 * v1 + om_g2 * v2;
        const double dQ1 = S11 * v1 + S12 * v2;
        const double dQ2 = S12 * v1 + S22 * v2;
        const double Q = 0.5 * (dQ1 * v1 + dQ2 * v2);

        const double b = beta(i);
        dbeta[i] += om_f * a + a1 * L + a2 * Q;
        const double P = b * (om_f * a1 + a2 * L + a3 * Q);
        db[i] += P;
        double* dWi = dW + i * kInputs;
        dWi[0] += P * z[0] + b * s[0] * (a1 * om_t);
        dWi[1] += P * z[1] + b * s[1] * (a1 * om_g1 + a2 * dQ1);
        dWi[2] += P * z[2] + b * s[2] * (a1 * om_g2 + a2 * dQ2);
    }
    *dc += om_f;
}

void Network::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write network file " + path.string());
    out << n_hidden_ << ' ' << kStateDim;
    for (int k = 0; k < kInputs; ++k)
        out << ' ' << format_double(scaling_.lo[k]) << ' ' << format_double(scaling_.hi[k]);
    out << '\n';
    for (Eigen::Index i = 0; i < theta_.size(); ++i) out << format_double(theta_[i]) << '\n';
    if (!out) throw Error("failed writing network file " + path.string());
}

Network Network::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open network file " + path.string());
    std::string line;
    std::getline(in, line);
    std::istringstream header(line);
    int n_hidden = 0, d = 0;
    header >> n_hidden >> d;
    if (!header || n_hidden < 1) throw Error("malformed network header in " + path.string());
    if (d != kStateDim) throw Error("network state dimension must be 2");
    InputScaling sc;
    for (int k = 0; k < kInputs; ++k) {
        std::string lo, hi;
        header >> lo >> hi;
        if (!header) throw Error("malformed network header in " + path.string());
        sc.lo[k] = parse_double(lo);
        sc.hi[k] = parse_double(hi);
    }
    Network net(n_hidden, sc);
    for (Eigen::Index i = 0; i < net.theta_.size(); ++i) {
        if (!std::getline(in, line)) throw Error("truncated network file " + path.string());
        net.theta_[i] = parse_double(line);
    }
    return net;
}

Eigen::VectorXd loss_param_gradient(const Network& net, std::span<const InputPoint> batch,
                                    const BatchLoss& loss, double* loss_value) {
    if (batch.empty()) throw DomainError("loss gradient needs a non-empty batch");
    std::vector<NetJet> jets(batch.size());
    std::vector<NeuronCache> caches(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k)
        jets[k] = net.jet(batch[k].t, batch[k].y, caches[k]);
    std::vector<JetAdjoint> adj(batch.size());
    const double L = loss(jets, adj);
    if (!std::isfinite(L)) throw NonFiniteError("loss is not finite");

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.size()));
    std::span<double> g(grad.data(), net.size());
    for (std::size_t k = 0; k < batch.size(); ++k)
        net.accumulate_param_gradient(batch[k].t, batch[k].y, adj[k], caches[k], g);
    if (!grad.allFinite()) throw NonFiniteError("parameter gradient is not finite");
    if (loss_value) *loss_value = L;
    return grad;
}

}  // namespace hjb
