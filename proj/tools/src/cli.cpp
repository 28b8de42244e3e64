#include <CLI11.hpp>

#include <ostream>

#include "hjb_cli/cli.hpp"
#include "hjb_cli/manifest.hpp"

namespace hjb::cli {

namespace {

struct RawArgs {
    std::string config, out_dir, model, window, times, run_a, run_b;
    long seed = -1;
    bool boundary_one = false;
    double t = 0.0;
    int nodes = 41;
};

std::optional<Window> window_arg(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_window(s);
}

std::optional<std::vector<double>> times_arg(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_times(s);
}

int dispatch(const CLI::App& app, const RawArgs& a, std::ostream& out, std::ostream& err) {
    if (app.got_subcommand("solve-dgm")) {
        DgmOptions o{a.config, a.out_dir, std::nullopt, window_arg(a.window), times_arg(a.times)};
        if (a.seed >= 0) o.seed = static_cast<std::uint64_t>(a.seed);
        return cmd_solve_dgm(o, err);
    }
    if (app.got_subcommand("solve-fdm")) {
        FdmOptions o{a.config, a.out_dir, std::nullopt, a.boundary_one, window_arg(a.window), times_arg(a.times)};
        if (!a.model.empty()) o.model_file = a.model;
        return cmd_solve_fdm(o, err);
    }
    if (app.got_subcommand("compare")) return cmd_compare({a.run_a, a.run_b, a.out_dir}, err);
    if (app.got_subcommand("portfolio")) {
        PortfolioOptions o{a.run_a, a.out_dir, a.t, a.nodes, window_arg(a.window)};
        if (o.out_dir.empty()) o.out_dir = o.run / "portfolio";
        return cmd_portfolio(o, err);
    }
    // verify
    const std::vector<std::string> bad = verify_manifest(a.run_a);
    for (const auto& name : bad) out << "checksum mismatch: " << name << "\n";
    if (bad.empty()) out << "ok\n";
    return bad.empty() ? kOk : kNumerical;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"HJB portfolio solvers: Deep Galerkin network and finite differences", "hjb"};
    app.require_subcommand(1, 1);
    RawArgs a;

    auto* dgm = app.add_subcommand("solve-dgm", "train the network and export u-surfaces");
    dgm->add_option("--config", a.config, "configuration file")->required();
    dgm->add_option("--out-dir", a.out_dir, "run directory")->required();
    dgm->add_option("--seed", a.seed, "override the configured seed")->check(CLI::NonNegativeNumber);
    dgm->add_option("--window", a.window, "plot window y1_lo,y1_hi,y2_lo,y2_hi");
    dgm->add_option("--times", a.times, "surface times, comma separated");

    auto* fdm = app.add_subcommand("solve-fdm", "solve the implicit scheme backward in time");
    fdm->add_option("--config", a.config, "configuration file")->required();
    fdm->add_option("--out-dir", a.out_dir, "run directory")->required();
    auto* model = fdm->add_option("--model", a.model, "trained network supplying boundary values");
    fdm->add_flag("--boundary-one", a.boundary_one, "use u = 1 on the boundary")->excludes(model);
    fdm->add_option("--window", a.window, "plot window y1_lo,y1_hi,y2_lo,y2_hi");
    fdm->add_option("--times", a.times, "surface times, comma separated");

    auto* cmp = app.add_subcommand("compare", "absolute differences between two runs");
    cmp->add_option("dgm-run", a.run_a, "first run directory")->required();
    cmp->add_option("fdm-run", a.run_b, "second run directory")->required();
    cmp->add_option("--out-dir", a.out_dir, "output directory")->required();

    auto* pf = app.add_subcommand("portfolio", "optimal weight surface from a run");
    pf->add_option("run", a.run_a, "run directory")->required();
    pf->add_option("--t", a.t, "time");
    pf->add_option("--nodes", a.nodes, "lattice nodes per axis");
    pf->add_option("--window", a.window, "lattice window y1_lo,y1_hi,y2_lo,y2_hi");
    pf->add_option("--out-dir", a.out_dir, "output directory (default <run>/portfolio)");

    auto* ver = app.add_subcommand("verify", "check a run's manifest checksums");
    ver->add_option("run", a.run_a, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        return dispatch(app, a, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NewtonFailure& e) {
        err << "error: " << e.what() << "\n";
        return kSingular;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace hjb::cli
