#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hjb/csv.hpp"
#include "hjb/pde.hpp"
#include "hjb_cli/cli.hpp"
#include "hjb_cli/manifest.hpp"

using namespace hjb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hjb_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Bundled config with overrides, written next to the run directories.
fs::path write_config(const fs::path& dir, const std::string& base, const std::map<std::string, std::string>& over) {
    FlatConfig cfg = FlatConfig::load(fs::path(HJB_CONFIG_DIR) / base);
    for (const auto& [k, v] : over) cfg.set(k, v);
    fs::create_directories(dir);
    const fs::path out = dir / "run.yaml";
    std::ofstream f(out);
    for (const auto& [k, v] : cfg.entries()) f << k << ": " << v << "\n";
    return out;
}

// A few seconds of training at most.
const std::map<std::string, std::string> kTiny = {{"n_hidden", "6"},     {"n_interior", "40"}, {"n_terminal", "10"},
                                                  {"inner_steps", "2"},  {"resample_every", "2"},
                                                  {"max_outer_steps", "3"}};

std::map<std::string, std::string> with(std::map<std::string, std::string> m,
                                        const std::map<std::string, std::string>& extra) {
    for (const auto& [k, v] : extra) m[k] = v;
    return m;
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "hjb");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run_exe(const std::string& args) {
    const std::string cmd = std::string("\"") + HJB_EXE + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> surface_files() {
    return {"u_t0.csv", "u_t0.25.csv", "u_t0.5.csv", "u_t0.75.csv"};
}

}  // namespace

TEST(SolveDgm, ZeroOuterStepsExportsUntrainedNetwork) {
    const fs::path dir = scratch("dgm_zero");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", with(kTiny, {{"max_outer_steps", "0"}}));
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "r").string()}), 0);
    const Network net = Network::load(dir / "r" / "model.net");
    EXPECT_EQ(CsvTable::read(dir / "r" / "loss_history.csv").rows.size(), 0u);
    for (const auto& name : surface_files()) {
        const CsvTable s = CsvTable::read(dir / "r" / name);
        ASSERT_EQ(s.header, (std::vector<std::string>{"y1", "y2", "u"}));
        ASSERT_EQ(s.rows.size(), 41u * 41u);
        const double t = parse_double(name.substr(3, name.size() - 7));
        for (std::size_t k = 0; k < s.rows.size(); k += 97)
            EXPECT_EQ(s.value(k, 2), net.forward(t, Vec2(s.value(k, 0), s.value(k, 1))));
    }
    // lattice corners of the default [0,1]^2 window
    const CsvTable s = CsvTable::read(dir / "r" / "u_t0.csv");
    EXPECT_EQ(s.value(0, 0), 0.0);
    EXPECT_EQ(s.value(0, 1), 0.0);
    EXPECT_EQ(s.value(s.rows.size() - 1, 0), 1.0);
    EXPECT_EQ(s.value(s.rows.size() - 1, 1), 1.0);
}

TEST(SolveDgm, SameSeedGivesByteIdenticalOutputs) {
    const fs::path dir = scratch("dgm_det");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", kTiny);
    for (const char* r : {"a", "b"})
        ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / r).string(), "--seed", "11"}), 0);
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "c").string(), "--seed", "12"}), 0);
    for (std::string f : {"loss_history.csv", "model.net", "u_t0.csv", "u_t0.25.csv", "u_t0.5.csv", "u_t0.75.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_NE(slurp(dir / "a" / "loss_history.csv"), slurp(dir / "c" / "loss_history.csv"));
    const auto ma = cli::Manifest::read(dir / "a").doc, mb = cli::Manifest::read(dir / "b").doc;
    EXPECT_EQ(ma["run_id"], mb["run_id"]);
    EXPECT_EQ(ma["seed"], 11);
    EXPECT_NE(ma["run_id"], cli::Manifest::read(dir / "c").doc["run_id"]);
}

TEST(SolveDgm, TimesAndWindowFlags) {
    const fs::path dir = scratch("dgm_flags");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", with(kTiny, {{"max_outer_steps", "0"}}));
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "r").string(), "--times", "0.1,1",
                   "--window", "-1,1,2,3"}),
              0);
    EXPECT_TRUE(fs::exists(dir / "r" / "u_t0.1.csv"));
    EXPECT_TRUE(fs::exists(dir / "r" / "u_t1.csv"));
    EXPECT_FALSE(fs::exists(dir / "r" / "u_t0.csv"));
    const CsvTable s = CsvTable::read(dir / "r" / "u_t1.csv");
    EXPECT_EQ(s.value(0, 0), -1.0);
    EXPECT_EQ(s.value(0, 1), 2.0);
    EXPECT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "x").string(), "--times", "2"}), 2);
    EXPECT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "x").string(), "--window", "1,0,0,1"}),
              2);
}

TEST(SolveFdm, ConstantModelWithUnitBoundaryIsUniformAndMatchesOracle) {
    const fs::path dir = scratch("fdm_const");
    const fs::path cfg = fs::path(HJB_CONFIG_DIR) / "constant.yaml";
    ASSERT_EQ(run({"solve-fdm", "--config", cfg.string(), "--out-dir", dir.string(), "--boundary-one"}), 0);
    const double c = 0.01 * 0.5;  // p r with mu = 0
    for (const auto& name : surface_files()) {
        const CsvTable s = CsvTable::read(dir / name);
        ASSERT_GT(s.rows.size(), 0u);
        const double t = parse_double(name.substr(3, name.size() - 7));
        const double first = s.value(0, 2);
        for (std::size_t k = 0; k < s.rows.size(); ++k) {
            EXPECT_EQ(s.value(k, 2), first);
            EXPECT_NEAR(s.value(k, 2), constant_oracle(t, c, 1.0), 1e-3);
        }
    }
    const auto m = cli::Manifest::read(dir).doc;
    EXPECT_EQ(m["status"], "ok");
    EXPECT_EQ(m["levels"].size(), 41u);
    EXPECT_TRUE(fs::exists(dir / "cube" / "level_00.csv"));
    EXPECT_TRUE(fs::exists(dir / "cube" / "level_40.csv"));
}

TEST(SolveFdm, BoundarySourceIsRequired) {
    const fs::path dir = scratch("fdm_usage");
    const std::string cfg = (fs::path(HJB_CONFIG_DIR) / "constant.yaml").string();
    EXPECT_EQ(run_exe("solve-fdm --config " + cfg + " --out-dir " + (dir / "a").string()), 2);
    EXPECT_EQ(run_exe("solve-fdm --config " + cfg + " --out-dir " + (dir / "b").string() + " --model " +
                      (dir / "missing.net").string()),
              2);
    EXPECT_FALSE(fs::exists(dir / "a" / "manifest.json"));
}

TEST(SolveFdm, NetworkBoundaryRunCompletes) {
    const fs::path dir = scratch("fdm_net");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", with(kTiny, {{"nt", "8"}, {"n1", "8"}, {"n2", "8"}}));
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "d").string()}), 0);
    const int rc = run({"solve-fdm", "--config", cfg.string(), "--out-dir", (dir / "f").string(), "--model",
                        (dir / "d" / "model.net").string()});
    const auto m = cli::Manifest::read(dir / "f").doc;
    EXPECT_EQ(rc == 0, m["status"] == "ok");
    EXPECT_EQ(m["levels"].size(), 9u);
    EXPECT_EQ(m["boundary"], "network:" + cli::sha256_file(dir / "d" / "model.net"));
    EXPECT_TRUE(cli::verify_manifest(dir / "f").empty());
}

TEST(Compare, RunAgainstItselfIsZero) {
    const fs::path dir = scratch("cmp_self");
    const fs::path cfg = write_config(dir, "constant.yaml", with(kTiny, {{"max_outer_steps", "0"}}));
    ASSERT_EQ(run({"solve-fdm", "--config", cfg.string(), "--out-dir", (dir / "f").string(), "--boundary-one"}), 0);
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "d").string()}), 0);
    for (const auto& [a, b] : {std::pair{"f", "f"}, std::pair{"d", "d"}}) {
        const fs::path out = dir / (std::string("c") + a);
        ASSERT_EQ(run({"compare", (dir / a).string(), (dir / b).string(), "--out-dir", out.string()}), 0);
        const CsvTable sum = CsvTable::read(out / "summary.csv");
        ASSERT_EQ(sum.header, (std::vector<std::string>{"t", "mean_abs_err", "max_abs_err", "nodes"}));
        ASSERT_EQ(sum.rows.size(), 4u);
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_EQ(sum.value(k, 1), 0.0);
            EXPECT_EQ(sum.value(k, 2), 0.0);
        }
        const CsvTable err = CsvTable::read(out / "err_t0.csv");
        EXPECT_EQ(err.header, (std::vector<std::string>{"y1", "y2", "abs_err"}));
    }
}

TEST(Compare, NetworkIsEvaluatedOnFdmNodes) {
    const fs::path dir = scratch("cmp_nodes");
    const fs::path cfg = write_config(dir, "constant.yaml", with(kTiny, {{"max_outer_steps", "0"}}));
    ASSERT_EQ(run({"solve-fdm", "--config", cfg.string(), "--out-dir", (dir / "f").string(), "--boundary-one"}), 0);
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "d").string()}), 0);
    ASSERT_EQ(run({"compare", (dir / "d").string(), (dir / "f").string(), "--out-dir", (dir / "c").string()}), 0);
    const Network net = Network::load(dir / "d" / "model.net");
    const CsvTable fu = CsvTable::read(dir / "f" / "u_t0.5.csv");
    const CsvTable err = CsvTable::read(dir / "c" / "err_t0.5.csv");
    ASSERT_EQ(err.rows.size(), fu.rows.size());
    for (std::size_t k = 0; k < err.rows.size(); ++k) {
        EXPECT_EQ(err.value(k, 0), fu.value(k, 0));
        EXPECT_EQ(err.value(k, 1), fu.value(k, 1));
        const double e = std::abs(net.forward(0.5, Vec2(fu.value(k, 0), fu.value(k, 1))) - fu.value(k, 2));
        EXPECT_EQ(err.value(k, 2), e);
    }
}

TEST(Compare, DomainMismatchIsUsageError) {
    const fs::path dir = scratch("cmp_mismatch");
    const fs::path c1 = write_config(dir / "1", "constant.yaml", {});
    const fs::path c2 = write_config(dir / "2", "constant.yaml", {{"y1_hi", "12"}});
    ASSERT_EQ(run({"solve-fdm", "--config", c1.string(), "--out-dir", (dir / "a").string(), "--boundary-one"}), 0);
    ASSERT_EQ(run({"solve-fdm", "--config", c2.string(), "--out-dir", (dir / "b").string(), "--boundary-one"}), 0);
    EXPECT_EQ(run({"compare", (dir / "a").string(), (dir / "b").string(), "--out-dir", (dir / "c").string()}), 2);
}

TEST(Portfolio, UncorrelatedModelGivesMertonRatio) {
    const fs::path dir = scratch("pf_merton");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", with(kTiny, {{"rho1", "0"}, {"rho2", "0"}}));
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "d").string()}), 0);
    ASSERT_EQ(run({"portfolio", (dir / "d").string(), "--t", "0.25", "--nodes", "11", "--window", "-1,1,0.1,2",
                   "--out-dir", (dir / "p").string()}),
              0);
    const CsvTable pi = CsvTable::read(dir / "p" / "pi_t0.25.csv");
    ASSERT_EQ(pi.header, (std::vector<std::string>{"y1", "y2", "pi"}));
    ASSERT_EQ(pi.rows.size(), 121u);
    const double p = 0.0005, sigma = 0.0724;
    for (std::size_t k = 0; k < pi.rows.size(); ++k) {
        const double y1 = pi.value(k, 0), y2 = pi.value(k, 1);
        const double merton = y1 / ((1.0 - p) * sigma * sigma * y2);
        EXPECT_NEAR(pi.value(k, 2), merton, 1e-10 * std::max(1.0, std::abs(merton)));
        if (y1 == 0.0) EXPECT_EQ(pi.value(k, 2), 0.0);
    }
    EXPECT_EQ(cli::Manifest::read(dir / "p").doc["degenerate_nodes"], 0);
}

TEST(Portfolio, FullModelMatchesTermByTermOracle) {
    const fs::path dir = scratch("pf_full");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", kTiny);
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "d").string()}), 0);
    ASSERT_EQ(run({"portfolio", (dir / "d").string(), "--t", "0.5", "--window", "0,1,0.2,1"}), 0);
    const Network net = Network::load(dir / "d" / "model.net");
    const ModelParams mp = ModelParams::calibrated(0.0005);
    const CsvTable pi = CsvTable::read(dir / "d" / "portfolio" / "pi_t0.5.csv");
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, pi.rows.size() - 1);
    for (int n = 0; n < 10; ++n) {
        const std::size_t k = pick(rng);
        const double y1 = pi.value(k, 0), y2 = pi.value(k, 1);
        const double u = net.forward(0.5, Vec2(y1, y2));
        const InputDerivatives d = net.input_gradient(0.5, Vec2(y1, y2));
        const double s2 = mp.sigma * mp.sigma * y2;
        const double ups1 = mp.sigma * std::sqrt(y2) * (mp.rho1 * mp.A(0, 0) + mp.rho2 * mp.A(0, 1));
        const double ups2 = mp.sigma * y2 * (mp.rho1 * mp.A(1, 0) + mp.rho2 * mp.A(1, 1));
        const double ref = (y1 / s2 + (ups1 * d.dy[0] + ups2 * d.dy[1]) / (u * s2)) / (1.0 - mp.p);
        if (u < kMinReducedValue) {
            EXPECT_TRUE(std::isnan(pi.value(k, 2)));
            continue;
        }
        EXPECT_NEAR(pi.value(k, 2), ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST(Portfolio, FdmRunIsReadBackFromCube) {
    const fs::path dir = scratch("pf_fdm");
    const fs::path cfg = fs::path(HJB_CONFIG_DIR) / "constant.yaml";
    ASSERT_EQ(run({"solve-fdm", "--config", cfg.string(), "--out-dir", (dir / "f").string(), "--boundary-one"}), 0);
    ASSERT_EQ(run({"portfolio", (dir / "f").string(), "--nodes", "5", "--out-dir", (dir / "p").string()}), 0);
    const CsvTable pi = CsvTable::read(dir / "p" / "pi_t0.csv");
    ASSERT_EQ(pi.rows.size(), 25u);
    for (std::size_t k = 0; k < pi.rows.size(); ++k) EXPECT_EQ(pi.value(k, 2), 0.0);  // mu = 0
}

TEST(Manifest, ChecksumsVerifyAndDetectTampering) {
    const fs::path dir = scratch("manifest");
    const fs::path cfg = fs::path(HJB_CONFIG_DIR) / "constant.yaml";
    ASSERT_EQ(run({"solve-fdm", "--config", cfg.string(), "--out-dir", dir.string(), "--boundary-one"}), 0);
    const auto doc = cli::Manifest::read(dir).doc;
    EXPECT_EQ(doc["command"], "solve-fdm");
    EXPECT_EQ(doc["run_id"].get<std::string>().size(), 12u);
    EXPECT_TRUE(doc.contains("timings_s"));
    EXPECT_EQ(doc["config"]["model"], "constant");
    EXPECT_TRUE(cli::verify_manifest(dir).empty());
    EXPECT_EQ(run_exe("verify " + dir.string()), 0);
    {
        std::ofstream f(dir / "u_t0.5.csv", std::ios::app);
        f << "0,0,0\n";
    }
    EXPECT_EQ(cli::verify_manifest(dir), std::vector<std::string>{"u_t0.5.csv"});
    EXPECT_NE(run_exe("verify " + dir.string()), 0);
}

TEST(Manifest, ConfigSnapshotRebuildsTheRun) {
    const fs::path dir = scratch("snapshot");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", kTiny);
    ASSERT_EQ(run({"solve-dgm", "--config", cfg.string(), "--out-dir", (dir / "a").string(), "--seed", "9"}), 0);
    ASSERT_EQ(run({"solve-dgm", "--config", (dir / "a" / "config.yaml").string(), "--out-dir",
                   (dir / "b").string()}),
              0);
    EXPECT_EQ(slurp(dir / "a" / "u_t0.csv"), slurp(dir / "b" / "u_t0.csv"));
    EXPECT_EQ(slurp(dir / "a" / "loss_history.csv"), slurp(dir / "b" / "loss_history.csv"));
}

TEST(ExitCodes, UsageErrors) {
    const fs::path dir = scratch("usage");
    EXPECT_EQ(run_exe(""), 2);
    EXPECT_EQ(run_exe("bogus"), 2);
    EXPECT_EQ(run_exe("--help"), 0);
    EXPECT_EQ(run_exe("solve-dgm --config " + (dir / "none.yaml").string() + " --out-dir " + dir.string()), 2);
    const fs::path bad = write_config(dir, "constant.yaml", {{"typo_key", "1"}});
    EXPECT_EQ(run_exe("solve-dgm --config " + bad.string() + " --out-dir " + (dir / "r").string()), 2);
    const fs::path neg = write_config(dir / "n", "constant.yaml", {{"lr_init", "-1"}});
    EXPECT_EQ(run_exe("solve-fdm --boundary-one --config " + neg.string() + " --out-dir " + (dir / "r").string()), 2);
}

TEST(ExitCodes, DivergentTrainingIsNumericalFailure) {
    const fs::path dir = scratch("diverge");
    const fs::path cfg = write_config(dir, "heston_p0005.yaml", with(kTiny, {{"lr_init", "1e300"}, {"optimizer", "sgd"}}));
    EXPECT_EQ(run_exe("solve-dgm --config " + cfg.string() + " --out-dir " + (dir / "r").string()), 3);
    EXPECT_EQ(cli::Manifest::read(dir / "r").doc["status"], "aborted");
}
