#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hjb::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// One manifest.json per run directory. `files` lists outputs relative to
/// the run directory with their sha256.
struct Manifest {
    nlohmann::json doc = nlohmann::json::object();

    void add_file(const std::filesystem::path& run_dir, const std::string& relative);
    void write(const std::filesystem::path& run_dir) const;
    static Manifest read(const std::filesystem::path& run_dir);
};

/// Names of listed files that are missing or whose checksum differs.
std::vector<std::string> verify_manifest(const std::filesystem::path& run_dir);

}  // namespace hjb::cli
