#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace hjb {

/// Flat key-value configuration read from a YAML mapping of scalars.
///
/// Values are kept as their source text so a configuration can be
/// snapshotted into a run manifest and rebuilt bit-for-bit later.
class FlatConfig {
public:
    FlatConfig() = default;
    explicit FlatConfig(std::map<std::string, std::string> entries);

    static FlatConfig load(const std::filesystem::path& path);
    static FlatConfig parse(const std::string& text);

    bool has(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    /// Throws ConfigError naming the first key not in `known`.
    void require_known(const std::set<std::string>& known) const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace hjb
