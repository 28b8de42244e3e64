#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "hjb_cli/cli.hpp"

namespace hjb::cli {

namespace {

const std::set<std::string> kKnownKeys = {
    "model", "theta1", "theta2", "k1", "k2", "a11", "a12", "a21", "a22", "sigma", "rho1", "rho2",
    "r", "p", "T", "const_mu", "const_sigma2", "y1_lo", "y1_hi", "y2_lo", "y2_hi", "y2_floor",
    "n_hidden", "n_interior", "n_terminal", "resample_every", "inner_steps", "lr_init", "lr_decay",
    "lr_decay_every", "adam_beta1", "adam_beta2", "adam_eps", "optimizer", "max_outer_steps",
    "param_delta_tol", "seed", "nt", "n1", "n2", "newton_tol", "newton_max_iter", "newton_rtol",
    "window_y1_lo", "window_y1_hi", "window_y2_lo", "window_y2_hi", "surface_nodes"};

int as_int(const FlatConfig& c, const std::string& key, int fallback) {
    return static_cast<int>(c.get_int(key, fallback));
}

TrainConfig train_config_from(const FlatConfig& c) {
    TrainConfig t;
    t.n_hidden = as_int(c, "n_hidden", t.n_hidden);
    t.n_interior = as_int(c, "n_interior", t.n_interior);
    t.n_terminal = as_int(c, "n_terminal", t.n_terminal);
    t.resample_every = as_int(c, "resample_every", t.resample_every);
    t.inner_steps = as_int(c, "inner_steps", t.inner_steps);
    t.lr_init = c.get_double("lr_init", t.lr_init);
    t.lr_decay = c.get_double("lr_decay", t.lr_decay);
    t.lr_decay_every = as_int(c, "lr_decay_every", t.lr_decay_every);
    t.adam_beta1 = c.get_double("adam_beta1", t.adam_beta1);
    t.adam_beta2 = c.get_double("adam_beta2", t.adam_beta2);
    t.adam_eps = c.get_double("adam_eps", t.adam_eps);
    t.max_outer_steps = c.get_int("max_outer_steps", t.max_outer_steps);
    t.param_delta_tol = c.get_double("param_delta_tol", t.param_delta_tol);
    const long seed = c.get_int("seed", static_cast<long>(t.seed));
    if (seed < 0) throw ConfigError("seed must be non-negative");
    t.seed = static_cast<std::uint64_t>(seed);
    const std::string opt = c.get_string("optimizer", "adam");
    if (opt == "adam")
        t.optimizer = OptimizerKind::adam;
    else if (opt == "sgd")
        t.optimizer = OptimizerKind::sgd;
    else
        throw ConfigError("optimizer must be adam or sgd");
    t.validate();
    return t;
}

void check_window(const Window& w) {
    if (!(w.y1_lo < w.y1_hi) || !(w.y2_lo < w.y2_hi) || !std::isfinite(w.y1_lo + w.y1_hi + w.y2_lo + w.y2_hi))
        throw UsageError("plot window must have lo < hi on both axes");
}

}  // namespace

Window default_window(const FlatConfig& cfg) {
    const double side = cfg.get_double("p") < 0.25 ? 1.0 : 5.0;
    Window w{0.0, side, 0.0, side};
    w.y1_lo = cfg.get_double("window_y1_lo", w.y1_lo);
    w.y1_hi = cfg.get_double("window_y1_hi", w.y1_hi);
    w.y2_lo = cfg.get_double("window_y2_lo", w.y2_lo);
    w.y2_hi = cfg.get_double("window_y2_hi", w.y2_hi);
    check_window(w);
    return w;
}

RunConfig load_run_config(const FlatConfig& cfg) {
    try {
        cfg.require_known(kKnownKeys);
        RunConfig rc{cfg, model_from(cfg), state_domain_from(cfg), train_config_from(cfg), {}, {}, {}, 41};
        if (std::abs(rc.domain.t_hi - rc.model.T()) > 0.0) throw ConfigError("domain horizon differs from T");
        rc.grid = Grid3D::from(rc.domain, as_int(cfg, "nt", 40), as_int(cfg, "n1", 40), as_int(cfg, "n2", 40));
        rc.newton.tol = cfg.get_double("newton_tol", rc.newton.tol);
        rc.newton.max_iter = as_int(cfg, "newton_max_iter", rc.newton.max_iter);
        rc.newton.rtol = cfg.get_double("newton_rtol", rc.newton.rtol);
        if (!(rc.newton.tol > 0.0) || rc.newton.max_iter < 1 || !(rc.newton.rtol >= 0.0))
            throw ConfigError("newton_tol > 0, newton_rtol >= 0 and newton_max_iter >= 1 required");
        rc.window = default_window(cfg);
        rc.surface_nodes = as_int(cfg, "surface_nodes", 41);
        if (rc.surface_nodes < 2) throw ConfigError("surface_nodes must be >= 2");
        return rc;
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        throw UsageError(std::string("invalid configuration: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    try {
        return load_run_config(FlatConfig::load(path));
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

Window parse_window(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        double x = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
        if (ec != std::errc() || p != cell.data() + cell.size())
            throw UsageError("--window expects y1_lo,y1_hi,y2_lo,y2_hi");
        v.push_back(x);
    }
    if (v.size() != 4) throw UsageError("--window expects y1_lo,y1_hi,y2_lo,y2_hi");
    const Window w{v[0], v[1], v[2], v[3]};
    check_window(w);
    return w;
}

std::vector<double> parse_times(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        double x = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
        if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(x))
            throw UsageError("--times expects a comma-separated list of times");
        out.push_back(x);
    }
    if (out.empty()) throw UsageError("--times expects at least one time");
    return out;
}

std::string time_tag(double t) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, t);
    if (ec != std::errc()) throw Error("time formatting failed");
    return "t" + std::string(buf, p);
}

}  // namespace hjb::cli
