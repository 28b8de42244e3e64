#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hjb/config.hpp"
#include "hjb/dgm.hpp"
#include "hjb/errors.hpp"
#include "hjb/fdm.hpp"
#include "hjb/model.hpp"

namespace hjb::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kSingular = 4 };

/// Bad invocation, bad configuration or incompatible inputs (exit 2).
class UsageError : public Error {
public:
    using Error::Error;
};

struct Window {
    double y1_lo = 0.0, y1_hi = 1.0, y2_lo = 0.0, y2_hi = 1.0;
};

/// Everything a command needs from the configuration file.
struct RunConfig {
    FlatConfig raw;
    Model model;
    StateDomain domain;
    TrainConfig train;
    Grid3D grid;
    NewtonOptions newton;
    Window window;
    int surface_nodes = 41;

    double T() const { return domain.t_hi; }
};

/// Reads and validates a configuration; all failures become UsageError.
RunConfig load_run_config(const FlatConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

/// [0,1]^2 for small p, [0,5]^2 otherwise, unless the config sets window_*.
Window default_window(const FlatConfig& cfg);

Window parse_window(const std::string& text);
std::vector<double> parse_times(const std::string& text);
/// Surface file stem for time t, e.g. "u_t0.25".
std::string time_tag(double t);

struct DgmOptions {
    std::filesystem::path config;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<Window> window;
    std::optional<std::vector<double>> times;
};

struct FdmOptions {
    std::filesystem::path config;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> model_file;
    bool boundary_one = false;
    std::optional<Window> window;
    std::optional<std::vector<double>> times;
};

struct CompareOptions {
    std::filesystem::path dgm_run;
    std::filesystem::path fdm_run;
    std::filesystem::path out_dir;
};

struct PortfolioOptions {
    std::filesystem::path run;
    std::filesystem::path out_dir;
    double t = 0.0;
    int nodes = 41;
    std::optional<Window> window;
};

int cmd_solve_dgm(const DgmOptions& opts, std::ostream& log);
int cmd_solve_fdm(const FdmOptions& opts, std::ostream& log);
int cmd_compare(const CompareOptions& opts, std::ostream& log);
int cmd_portfolio(const PortfolioOptions& opts, std::ostream& log);

/// Parses argv, runs one subcommand and maps errors onto exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hjb::cli
