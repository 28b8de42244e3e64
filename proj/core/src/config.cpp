#include "hjb/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "hjb/errors.hpp"

namespace hjb {

namespace {

FlatConfig from_node(const YAML::Node& root) {
    std::map<std::string, std::string> entries;
    if (!root || root.IsNull()) return FlatConfig(std::move(entries));
    if (!root.IsMap()) throw ConfigError("configuration must be a flat key-value mapping");
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (!kv.second.IsScalar()) {
            throw ConfigError("configuration key '" + key + "' must hold a scalar value");
        }
        entries[key] = kv.second.Scalar();
    }
    return FlatConfig(std::move(entries));
}

}  // namespace

FlatConfig::FlatConfig(std::map<std::string, std::string> entries)
    : entries_(std::move(entries)) {}

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

FlatConfig FlatConfig::parse(const std::string& text) {
    try {
        return from_node(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
}

bool FlatConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

double FlatConfig::get_double(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing configuration key '" + key + "'");
    const std::string& s = it->second;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("configuration key '" + key + "' is not a number: " + s);
    }
    return v;
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long FlatConfig::get_int(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing configuration key '" + key + "'");
    const std::string& s = it->second;
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("configuration key '" + key + "' is not an integer: " + s);
    }
    return v;
}

long FlatConfig::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

void FlatConfig::require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : entries_) {
        if (!known.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    }
}

}  // namespace hjb
