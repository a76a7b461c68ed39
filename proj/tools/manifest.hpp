#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace gbmd::cli {

// Record of a finished run, written next to its outputs. The key=value lines
// replay through --config; provenance lines ride along as '#' comments.
struct Manifest {
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> options;
    std::vector<std::pair<std::string, std::string>> meta;

    void opt(const std::string& key, const std::string& value);
    void opt(const std::string& key, double value);
    void opt(const std::string& key, std::int64_t value);
    void opt(const std::string& key, std::uint64_t value);
    void note(const std::string& key, const std::string& value);
    void note(const std::string& key, double value);
    void note(const std::string& key, std::int64_t value);
};

void write_manifest(const Manifest& m, const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// FNV-1a over the file bytes; stable content id for checkpoints.
std::string file_digest(const std::filesystem::path& path);

std::string utc_timestamp();

} // namespace gbmd::cli
