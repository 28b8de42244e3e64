#include "hjb_cli/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <sstream>

#include "hjb/errors.hpp"

namespace hjb::cli {

namespace {

std::string hex(const unsigned char* d, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(2 * n);
    for (unsigned i = 0; i < n; ++i) {
        s.push_back(digits[d[i] >> 4]);
        s.push_back(digits[d[i] & 15]);
    }
    return s;
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        throw Error("sha256 failed");
    return hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_all(path)); }

void Manifest::add_file(const std::filesystem::path& run_dir, const std::string& relative) {
    doc["files"].push_back({{"name", relative}, {"sha256", sha256_file(run_dir / relative)}});
}

void Manifest::write(const std::filesystem::path& run_dir) const {
    std::ofstream out(run_dir / "manifest.json", std::ios::binary);
    if (!out) throw Error("cannot write manifest in " + run_dir.string());
    out << doc.dump(2) << '\n';
}

Manifest Manifest::read(const std::filesystem::path& run_dir) {
    Manifest m;
    try {
        m.doc = nlohmann::json::parse(read_all(run_dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed manifest in " + run_dir.string() + ": " + e.what());
    }
    return m;
}

std::vector<std::string> verify_manifest(const std::filesystem::path& run_dir) {
    const Manifest m = Manifest::read(run_dir);
    std::vector<std::string> bad;
    if (!m.doc.contains("files")) return bad;
    for (const auto& f : m.doc["files"]) {
        const std::string name = f.at("name");
        const auto path = run_dir / name;
        if (!std::filesystem::exists(path) || sha256_file(path) != f.at("sha256").get<std::string>())
            bad.push_back(name);
    }
    return bad;
}

}  // namespace hjb::cli
