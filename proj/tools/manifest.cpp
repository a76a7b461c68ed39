#include "manifest.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "gbmd/errors.hpp"

namespace gbmd::cli {

std::string format_double(double v) {
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return "0";
}

void Manifest::opt(const std::string& key, const std::string& value) {
    options.emplace_back(key, value);
}
void Manifest::opt(const std::string& key, double value) {
    options.emplace_back(key, format_double(value));
}
void Manifest::opt(const std::string& key, std::int64_t value) {
    options.emplace_back(key, std::to_string(value));
}
void Manifest::opt(const std::string& key, std::uint64_t value) {
    options.emplace_back(key, std::to_string(value));
}
void Manifest::note(const std::string& key, const std::string& value) {
    meta.emplace_back(key, value);
}
void Manifest::note(const std::string& key, double value) {
    meta.emplace_back(key, format_double(value));
}
void Manifest::note(const std::string& key, std::int64_t value) {
    meta.emplace_back(key, std::to_string(value));
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest " + path.string());
    out << "# gbmd manifest\n";
    out << "# subcommand=" << m.subcommand << "\n";
    for (const auto& [k, v] : m.meta) out << "# " << k << "=" << v << "\n";
    out << "[" << m.subcommand << "]\n";
    for (const auto& [k, v] : m.options) out << k << "=" << v << "\n";
    if (!out) throw ConfigError("failed writing manifest " + path.string());
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string() + " for hashing");
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[32];
    std::snprintf(hex, sizeof hex, "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace gbmd::cli
