#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

#include "hjb/csv.hpp"
#include "hjb/portfolio.hpp"
#include "hjb_cli/cli.hpp"
#include "hjb_cli/manifest.hpp"

namespace hjb::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Extreme-value band for the FDM cube; outside it the run is reported as the
// singular outcome.
constexpr double kSingularHigh = 1e12;

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

FlatConfig read_config(const fs::path& path) {
    try {
        return FlatConfig::load(path);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
}

/// Effective configuration, one sorted `key: value` line per entry.
std::string config_text(const FlatConfig& cfg) {
    std::string s;
    for (const auto& [k, v] : cfg.entries()) s += k + ": " + v + "\n";
    return s;
}

json config_json(const FlatConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg.entries()) j[k] = v;
    return j;
}

FlatConfig config_from_json(const json& j) {
    std::map<std::string, std::string> m;
    for (const auto& [k, v] : j.items()) m[k] = v.get<std::string>();
    return FlatConfig(std::move(m));
}

Manifest start_manifest(const std::string& command, const FlatConfig& cfg, const fs::path& dir) {
    const std::string text = config_text(cfg);
    {
        std::ofstream out(dir / "config.yaml", std::ios::binary);
        out << text;
        if (!out) throw Error("cannot write config snapshot in " + dir.string());
    }
    Manifest m;
    m.doc["command"] = command;
    m.doc["run_id"] = sha256_hex(command + "\n" + text).substr(0, 12);
    m.doc["seed"] = cfg.get_int("seed", 42);
    m.doc["config"] = config_json(cfg);
    m.doc["files"] = json::array();
    m.add_file(dir, "config.yaml");
    return m;
}

std::vector<double> default_times(double T) { return {0.0, 0.25 * T, 0.5 * T, 0.75 * T}; }

std::vector<double> checked_times(const std::optional<std::vector<double>>& given, double T) {
    std::vector<double> times = given.value_or(default_times(T));
    for (double t : times)
        if (!(t >= 0.0 && t <= T)) throw UsageError("surface times must lie in [0, T]");
    return times;
}

double lattice(double lo, double hi, int k, int nodes) {
    return k == nodes - 1 ? hi : lo + (hi - lo) * k / (nodes - 1);
}

json window_json(const Window& w) { return json::array({w.y1_lo, w.y1_hi, w.y2_lo, w.y2_hi}); }

/// Value of the cube at node (i, j) and time t, linear between levels.
double cube_value(const SolutionCube& cube, double t, int i, int j) {
    const Grid3D& g = cube.grid();
    const double s = std::clamp(t / g.dt(), 0.0, static_cast<double>(g.nt));
    const double r = std::round(s);
    if (std::abs(s - r) < 1e-9) return cube.at(static_cast<int>(r), i, j);
    const int n = std::min(static_cast<int>(std::floor(s)), g.nt - 1);
    const double w = s - n;
    return (1.0 - w) * cube.at(n, i, j) + w * cube.at(n + 1, i, j);
}

std::string level_file(int n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cube/level_%02d.csv", n);
    return buf;
}

SolutionCube read_cube(const fs::path& run, const Grid3D& g) {
    SolutionCube cube(g);
    for (int n = 0; n <= g.nt; ++n) {
        const CsvTable t = CsvTable::read(run / level_file(n));
        if (t.rows.size() != g.level_size()) throw Error("cube level " + std::to_string(n) + " has wrong size");
        const std::size_t cu = t.column("u");
        for (int i = 0; i <= g.n1; ++i)
            for (int j = 0; j <= g.n2; ++j) cube.at(n, i, j) = t.value(g.node(i, j), cu);
    }
    return cube;
}

struct RunSource {
    fs::path dir;
    Manifest manifest;
    std::string kind;  // "solve-dgm" or "solve-fdm"
    FlatConfig cfg;

    static RunSource open(const fs::path& dir) {
        RunSource s{dir, {}, {}, {}};
        try {
            s.manifest = Manifest::read(dir);
        } catch (const Error& e) {
            throw UsageError(std::string("not a run directory: ") + e.what());
        }
        s.kind = s.manifest.doc.value("command", "");
        if (s.kind != "solve-dgm" && s.kind != "solve-fdm")
            throw UsageError(dir.string() + " is not a solve-dgm or solve-fdm run");
        s.cfg = config_from_json(s.manifest.doc.at("config"));
        return s;
    }

    std::vector<double> times() const { return manifest.doc.at("times").get<std::vector<double>>(); }
};

}  // namespace

// ---------------------------------------------------------------------------

int cmd_solve_dgm(const DgmOptions& opts, std::ostream& log) {
    FlatConfig raw = read_config(opts.config);
    if (opts.seed) raw.set("seed", std::to_string(*opts.seed));
    const RunConfig rc = load_run_config(raw);
    const Window window = opts.window.value_or(rc.window);
    const std::vector<double> times = checked_times(opts.times, rc.T());
    make_dir(opts.out_dir);

    Manifest man = start_manifest("solve-dgm", raw, opts.out_dir);
    man.doc["times"] = times;
    man.doc["window"] = window_json(window);
    Stopwatch clock;

    // The initial weights use a seed distinct from the sampling stream.
    const std::uint64_t init_seed = rc.train.seed + 1;
    man.doc["init_seed"] = init_seed;
    const Network net0 = Network::init(rc.train.n_hidden, init_seed, InputScaling::from(rc.domain));
    log << "solve-dgm: training " << rc.train.max_outer_steps << " outer steps x "
        << rc.train.inner_steps << " updates (" << rc.model.name() << ", p = " << rc.model.p() << ")\n";
    TrainResult res{net0, {}};
    try {
        res = train(net0, rc.train, rc.model, rc.domain);
    } catch (const TrainingAborted& e) {
        man.doc["status"] = "aborted";
        man.doc["failure"] = e.what();
        man.doc["timings_s"] = {{"train", clock.lap()}};
        man.write(opts.out_dir);
        log << "solve-dgm: " << e.what() << "\n";
        return kNumerical;
    }
    const double t_train = clock.lap();

    res.net.save(opts.out_dir / "model.net");
    man.add_file(opts.out_dir, "model.net");
    write_history_csv(opts.out_dir / "loss_history.csv", res.history);
    man.add_file(opts.out_dir, "loss_history.csv");

    const int nodes = rc.surface_nodes;
    for (double t : times) {
        CsvTable s;
        s.header = {"y1", "y2", "u"};
        for (int a = 0; a < nodes; ++a)
            for (int b = 0; b < nodes; ++b) {
                const double y1 = lattice(window.y1_lo, window.y1_hi, a, nodes);
                const double y2 = lattice(window.y2_lo, window.y2_hi, b, nodes);
                s.add_row({y1, y2, res.net.forward(t, Vec2(y1, y2))});
            }
        const std::string name = "u_" + time_tag(t) + ".csv";
        s.write(opts.out_dir / name);
        man.add_file(opts.out_dir, name);
    }
    if (!res.history.empty()) {
        const HistoryRow& last = res.history.back();
        man.doc["final_loss"] = {{"J", last.J}, {"J1", last.J1}, {"J2", last.J2}};
    }
    man.doc["updates"] = res.history.size();
    man.doc["status"] = "ok";
    man.doc["timings_s"] = {{"train", t_train}, {"export", clock.lap()}};
    man.write(opts.out_dir);
    log << "solve-dgm: wrote " << opts.out_dir.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_solve_fdm(const FdmOptions& opts, std::ostream& log) {
    if (opts.boundary_one == opts.model_file.has_value())
        throw UsageError("solve-fdm needs exactly one boundary source: --model <file> or --boundary-one");
    FlatConfig raw = read_config(opts.config);
    const RunConfig rc = load_run_config(raw);
    const Window window = opts.window.value_or(rc.window);
    const std::vector<double> times = checked_times(opts.times, rc.T());

    BoundaryProvider boundary;
    std::string boundary_desc = "one";
    if (opts.model_file) {
        if (!fs::exists(*opts.model_file))
            throw UsageError("model file not found: " + opts.model_file->string());
        Network net = [&] {
            try {
                return Network::load(*opts.model_file);
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
        }();
        boundary_desc = "network:" + sha256_file(*opts.model_file);
        boundary = network_boundary(std::move(net));
    } else {
        boundary = constant_one_boundary();
    }
    make_dir(opts.out_dir);
    make_dir(opts.out_dir / "cube");

    Manifest man = start_manifest("solve-fdm", raw, opts.out_dir);
    man.doc["times"] = times;
    man.doc["window"] = window_json(window);
    man.doc["boundary"] = boundary_desc;
    const Grid3D& g = rc.grid;
    man.doc["grid"] = {{"nt", g.nt}, {"n1", g.n1}, {"n2", g.n2}, {"dt", g.dt()}, {"dy1", g.dy1()}, {"dy2", g.dy2()}};
    man.doc["newton"] = {{"tol", rc.newton.tol}, {"rtol", rc.newton.rtol}, {"max_iter", rc.newton.max_iter}};
    Stopwatch clock;

    log << "solve-fdm: " << g.nt << " levels, " << g.interior_count() << " unknowns per level, boundary "
        << (opts.boundary_one ? "one" : "network") << "\n";
    const BackwardResult res = solve_backward(g, rc.model, boundary, rc.newton, OnNewtonFailure::record);
    const double t_solve = clock.lap();

    bool singular = res.failed_level.has_value();
    json levels = json::array();
    for (int n = 0; n <= g.nt; ++n) {
        double umax = 0.0, umin = std::numeric_limits<double>::infinity();
        bool finite = true;
        for (double v : res.cube.level(n)) {
            if (!std::isfinite(v)) {
                finite = false;
                continue;
            }
            umax = std::max(umax, std::abs(v));
            umin = std::min(umin, v);
        }
        json row = {{"level", n}, {"t", g.t(n)}};
        row["max_abs_u"] = finite ? json(umax) : json(nullptr);
        row["min_u"] = finite ? json(umin) : json(nullptr);
        if (n < g.nt && !(res.failed_level && n <= *res.failed_level)) {
            const NewtonReport& r = res.reports[n];
            row["iterations"] = r.iterations;
            row["final_residual"] = r.residual_norms.empty() ? 0.0 : r.residual_norms.back();
            row["met_abs_tol"] = r.met_abs_tol;
        }
        if (finite && (umax > kSingularHigh || umin < kMinReducedValue)) singular = true;
        levels.push_back(row);
    }
    man.doc["levels"] = levels;
    if (res.failed_level) {
        man.doc["failed_level"] = *res.failed_level;
        man.doc["failure"] = res.failure;
        log << "solve-fdm: Newton failed at level " << *res.failed_level << ": " << res.failure << "\n";
    }

    for (int n = 0; n <= g.nt; ++n) {
        CsvTable t;
        t.header = {"y1", "y2", "u"};
        for (int i = 0; i <= g.n1; ++i)
            for (int j = 0; j <= g.n2; ++j) t.add_row({g.y1(i), g.y2(j), res.cube.at(n, i, j)});
        t.write(opts.out_dir / level_file(n));
        man.add_file(opts.out_dir, level_file(n));
    }
    for (double tt : times) {
        CsvTable s;
        s.header = {"y1", "y2", "u"};
        for (int i = 1; i < g.n1; ++i)
            for (int j = 1; j < g.n2; ++j) {
                const double y1 = g.y1(i), y2 = g.y2(j);
                if (y1 < window.y1_lo || y1 > window.y1_hi || y2 < window.y2_lo || y2 > window.y2_hi) continue;
                s.add_row({y1, y2, cube_value(res.cube, tt, i, j)});
            }
        const std::string name = "u_" + time_tag(tt) + ".csv";
        s.write(opts.out_dir / name);
        man.add_file(opts.out_dir, name);
    }
    man.doc["status"] = singular ? "singular" : "ok";
    man.doc["timings_s"] = {{"solve", t_solve}, {"export", clock.lap()}};
    man.write(opts.out_dir);
    if (singular) {
        log << "solve-fdm: singular values (Newton failure or |u| outside [1e-8, 1e12]); cube written to "
            << opts.out_dir.string() << "\n";
        return kSingular;
    }
    log << "solve-fdm: wrote " << opts.out_dir.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_compare(const CompareOptions& opts, std::ostream& log) {
    const RunSource a = RunSource::open(opts.dgm_run), b = RunSource::open(opts.fdm_run);
    for (const char* key : {"model", "p", "T", "y1_lo", "y1_hi", "y2_lo", "y2_hi"}) {
        const std::string va = a.cfg.get_string(key, "heston"), vb = b.cfg.get_string(key, "heston");
        if (va == vb) continue;
        bool same = false;
        try {
            same = parse_double(va) == parse_double(vb);
        } catch (const Error&) {
        }
        if (!same) throw UsageError(std::string("runs differ in '") + key + "': " + va + " vs " + vb);
    }
    std::vector<double> times;
    for (double t : a.times())
        for (double s : b.times())
            if (t == s) times.push_back(t);
    if (times.empty()) throw UsageError("runs share no surface time");
    make_dir(opts.out_dir);

    auto net_of = [](const RunSource& r) -> std::optional<Network> {
        if (r.kind == "solve-dgm") return Network::load(r.dir / "model.net");
        return std::nullopt;
    };
    const std::optional<Network> na = net_of(a), nb = net_of(b);
    // Nodes come from the FDM lattice when one side is an FDM run.
    const RunSource& lattice_src = b.kind == "solve-fdm" ? b : a;

    Manifest man;
    man.doc["command"] = "compare";
    man.doc["inputs"] = {{"a", {{"dir", fs::absolute(a.dir).string()}, {"run_id", a.manifest.doc.value("run_id", "")}}},
                         {"b", {{"dir", fs::absolute(b.dir).string()}, {"run_id", b.manifest.doc.value("run_id", "")}}}};
    man.doc["run_id"] = sha256_hex(man.doc["inputs"].dump()).substr(0, 12);
    man.doc["times"] = times;
    man.doc["files"] = json::array();
    Stopwatch clock;

    CsvTable summary;
    summary.header = {"t", "mean_abs_err", "max_abs_err", "nodes"};
    for (double t : times) {
        const std::string tag = time_tag(t);
        const CsvTable nodes = CsvTable::read(lattice_src.dir / ("u_" + tag + ".csv"));
        auto values = [&](const RunSource& r, const std::optional<Network>& net) {
            std::vector<double> v(nodes.rows.size());
            if (net) {
                for (std::size_t k = 0; k < v.size(); ++k)
                    v[k] = net->forward(t, Vec2(nodes.value(k, 0), nodes.value(k, 1)));
                return v;
            }
            const CsvTable own = CsvTable::read(r.dir / ("u_" + tag + ".csv"));
            if (own.rows.size() != v.size()) throw UsageError("surface lattices differ at " + tag);
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (own.value(k, 0) != nodes.value(k, 0) || own.value(k, 1) != nodes.value(k, 1))
                    throw UsageError("surface lattices differ at " + tag);
                v[k] = own.value(k, 2);
            }
            return v;
        };
        const std::vector<double> va = values(a, na), vb = values(b, nb);
        CsvTable err;
        err.header = {"y1", "y2", "abs_err"};
        double sum = 0.0, mx = 0.0;
        for (std::size_t k = 0; k < va.size(); ++k) {
            const double e = std::abs(va[k] - vb[k]);
            err.add_row({nodes.value(k, 0), nodes.value(k, 1), e});
            sum += e;
            mx = std::isnan(e) ? e : std::max(mx, e);
        }
        const double mean = va.empty() ? 0.0 : sum / static_cast<double>(va.size());
        const std::string name = "err_" + tag + ".csv";
        err.write(opts.out_dir / name);
        man.add_file(opts.out_dir, name);
        summary.add_row({t, mean, mx, static_cast<double>(va.size())});
        log << "compare: t = " << t << " mean |diff| = " << mean << " max = " << mx << "\n";
    }
    summary.write(opts.out_dir / "summary.csv");
    man.add_file(opts.out_dir, "summary.csv");
    man.doc["timings_s"] = {{"compare", clock.lap()}};
    man.write(opts.out_dir);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_portfolio(const PortfolioOptions& opts, std::ostream& log) {
    const RunSource src = RunSource::open(opts.run);
    const RunConfig rc = load_run_config(src.cfg);
    if (!(opts.t >= 0.0 && opts.t <= rc.T())) throw UsageError("--t must lie in [0, T]");
    if (opts.nodes < 2) throw UsageError("--nodes must be >= 2");
    const Window window = opts.window.value_or(rc.window);
    make_dir(opts.out_dir);

    std::unique_ptr<SolvedSurface> surface;
    if (src.kind == "solve-dgm")
        surface = std::make_unique<NetworkSurface>(Network::load(src.dir / "model.net"));
    else
        surface = std::make_unique<CubeSurface>(read_cube(src.dir, rc.grid));

    CsvTable pi;
    pi.header = {"y1", "y2", "pi"};
    long degenerate = 0;
    for (int a = 0; a < opts.nodes; ++a)
        for (int b = 0; b < opts.nodes; ++b) {
            const Vec2 y(lattice(window.y1_lo, window.y1_hi, a, opts.nodes),
                         lattice(window.y2_lo, window.y2_hi, b, opts.nodes));
            double w = std::numeric_limits<double>::quiet_NaN();
            try {
                w = optimal_weight(opts.t, y, *surface, rc.model);
            } catch (const DegenerateSurfaceError&) {
            } catch (const DivisionHazardError&) {
            }
            if (std::isnan(w)) ++degenerate;
            pi.add_row({y[0], y[1], w});
        }
    const std::string name = "pi_" + time_tag(opts.t) + ".csv";
    pi.write(opts.out_dir / name);

    Manifest man;
    man.doc["command"] = "portfolio";
    man.doc["source"] = {{"dir", fs::absolute(src.dir).string()}, {"run_id", src.manifest.doc.value("run_id", "")}};
    man.doc["run_id"] = sha256_hex(man.doc["source"].dump() + time_tag(opts.t)).substr(0, 12);
    man.doc["t"] = opts.t;
    man.doc["nodes"] = opts.nodes;
    man.doc["window"] = window_json(window);
    man.doc["degenerate_nodes"] = degenerate;
    man.doc["files"] = json::array();
    man.add_file(opts.out_dir, name);
    man.write(opts.out_dir);
    if (degenerate) log << "portfolio: " << degenerate << " degenerate lattice nodes (u < 1e-8) written as nan\n";
    return kOk;
}

}  // namespace hjb::cli
