#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gbmd/errors.hpp"
#include "gbmd/train.hpp"
#include "json.hpp"

namespace gbmd {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'G', 'B', 'M', 'D'};

void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }
void put_f32(std::string& b, float v) { put_u32(b, std::bit_cast<std::uint32_t>(v)); }

// Sequential reader over the raw file bytes; every read is bounds-checked so
// a truncated file fails with the exact offset.
struct Cursor {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t count, const char* what) const {
        if (off + count > n) {
            throw CorruptCheckpointError(std::string("checkpoint truncated reading ") + what,
                                         off);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[off + i]) << (8 * i);
        off += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

nlohmann::json rng_json(const RngCursor& r) {
    return {{"seed", r.seed},
            {"stream", r.stream},
            {"counter", r.counter},
            {"has_cache", r.has_cache},
            {"cache", r.cache}};
}

RngCursor rng_from_json(const nlohmann::json& j) {
    RngCursor r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.stream = j.at("stream").get<std::uint64_t>();
    r.counter = j.at("counter").get<std::uint64_t>();
    r.has_cache = j.at("has_cache").get<bool>();
    r.cache = j.at("cache").get<double>();
    return r;
}

nlohmann::json header_json(const Checkpoint& c) {
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < c.param_names.size(); ++i) {
        params.push_back({{"name", c.param_names[i]}, {"count", c.params[i].size()}});
    }
    return {{"adam_t", c.opt.t},
            {"arch",
             {{"kind", c.arch.kind},
              {"in_channels", c.arch.in_channels},
              {"base_channels", c.arch.base_channels},
              {"emb_dim", c.arch.emb_dim},
              {"hidden", c.arch.hidden}}},
            {"config",
             {{"epochs", c.config.epochs},
              {"batch", c.config.batch},
              {"lr", c.config.lr},
              {"steps", c.config.steps},
              {"eta_per_step", c.config.eta_per_step},
              {"seed", c.config.seed},
              {"patch", c.config.patch},
              {"data_dir", c.config.data_dir},
              {"checkpoint_interval", c.config.checkpoint_interval},
              {"snapshot_path", c.config.snapshot_path}}},
            {"epoch", c.epoch},
            {"params", std::move(params)},
            {"rng",
             {{"data", rng_json(c.data_rng)},
              {"k", rng_json(c.k_rng)},
              {"noise", rng_json(c.noise_rng)}}}};
}

struct ParsedHeader {
    nlohmann::json j;
    std::size_t body_off = 0; // first byte after the header
};

ParsedHeader read_header(Cursor& cur) {
    cur.need(4, "magic");
    if (std::memcmp(cur.p, kMagic, 4) != 0) {
        throw CorruptCheckpointError("checkpoint magic mismatch", 0);
    }
    cur.off = 4;
    const std::uint32_t version = cur.u32("version");
    if (version != kCheckpointVersion) {
        throw UnsupportedVersionError("checkpoint version " + std::to_string(version) +
                                      " is not supported (expected " +
                                      std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t hlen = cur.u64("header length");
    const std::size_t hoff = cur.off;
    cur.need(hlen, "header");
    ParsedHeader out;
    try {
        out.j = nlohmann::json::parse(cur.p + hoff, cur.p + hoff + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("checkpoint header is not valid JSON: ") +
                                         e.what(),
                                     hoff);
    }
    cur.off = hoff + hlen;
    out.body_off = cur.off;
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CorruptCheckpointError("checkpoint cannot be opened: " + path.string(), 0);
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    if (c.params.size() != c.param_names.size() || c.opt.m.size() != c.params.size() ||
        c.opt.v.size() != c.params.size()) {
        throw ContractError("checkpoint: parameter, name, and moment lists must align");
    }
    std::string b;
    b.append(kMagic, 4);
    put_u32(b, kCheckpointVersion);
    const std::string header = header_json(c).dump();
    put_u64(b, header.size());
    b += header;
    put_u64(b, c.schedule.eta.size());
    for (double e : c.schedule.eta) put_f64(b, e);
    for (const auto& blob : c.params) {
        for (double v : blob) put_f32(b, static_cast<float>(v));
    }
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        for (double v : c.opt.m[i]) put_f64(b, v);
        for (double v : c.opt.v[i]) put_f64(b, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    }
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
    if (!out) {
        throw std::runtime_error("checkpoint: short write to " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    Cursor cur{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    ParsedHeader h = read_header(cur);

    Checkpoint c;
    try {
        const nlohmann::json& j = h.j;
        c.opt.t = j.at("adam_t").get<std::int64_t>();
        const auto& a = j.at("arch");
        c.arch.kind = a.at("kind").get<std::string>();
        c.arch.in_channels = a.at("in_channels").get<int>();
        c.arch.base_channels = a.at("base_channels").get<int>();
        c.arch.emb_dim = a.at("emb_dim").get<int>();
        c.arch.hidden = a.at("hidden").get<int>();
        const auto& cf = j.at("config");
        c.config.epochs = cf.at("epochs").get<int>();
        c.config.batch = cf.at("batch").get<int>();
        c.config.lr = cf.at("lr").get<double>();
        c.config.steps = cf.at("steps").get<int>();
        c.config.eta_per_step = cf.at("eta_per_step").get<double>();
        c.config.seed = cf.at("seed").get<std::uint64_t>();
        c.config.patch = cf.at("patch").get<int>();
        c.config.data_dir = cf.at("data_dir").get<std::string>();
        c.config.checkpoint_interval = cf.at("checkpoint_interval").get<int>();
        c.config.snapshot_path = cf.at("snapshot_path").get<std::string>();
        c.config.arch = c.arch;
        c.epoch = j.at("epoch").get<int>();
        for (const auto& p : j.at("params")) {
            c.param_names.push_back(p.at("name").get<std::string>());
            c.params.emplace_back(p.at("count").get<std::size_t>());
        }
        const auto& r = j.at("rng");
        c.data_rng = rng_from_json(r.at("data"));
        c.k_rng = rng_from_json(r.at("k"));
        c.noise_rng = rng_from_json(r.at("noise"));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("checkpoint header is incomplete: ") + e.what(),
                                     h.body_off);
    }

    const std::uint64_t eta_count = cur.u64("schedule length");
    if (eta_count != static_cast<std::uint64_t>(c.config.steps) + 1) {
        throw CorruptCheckpointError("checkpoint schedule length " + std::to_string(eta_count) +
                                         " does not match steps " +
                                         std::to_string(c.config.steps),
                                     cur.off - 8);
    }
    c.schedule.K = c.config.steps;
    c.schedule.eta.resize(eta_count);
    for (std::uint64_t i = 0; i < eta_count; ++i) {
        c.schedule.eta[i] = cur.f64("schedule");
    }
    for (auto& blob : c.params) {
        for (double& v : blob) v = static_cast<double>(cur.f32("parameters"));
    }
    c.opt.m.resize(c.params.size());
    c.opt.v.resize(c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        c.opt.m[i].resize(c.params[i].size());
        c.opt.v[i].resize(c.params[i].size());
        for (double& v : c.opt.m[i]) v = cur.f64("optimizer state");
        for (double& v : c.opt.v[i]) v = cur.f64("optimizer state");
    }
    if (cur.off != cur.n) {
        throw CorruptCheckpointError("checkpoint has " + std::to_string(cur.n - cur.off) +
                                         " trailing bytes",
                                     cur.off);
    }
    return c;
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    Cursor cur{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    ParsedHeader h = read_header(cur);
    CheckpointInfo info;
    info.version = kCheckpointVersion;
    try {
        const nlohmann::json& j = h.j;
        const auto& cf = j.at("config");
        info.steps = cf.at("steps").get<int>();
        info.eta_per_step = cf.at("eta_per_step").get<double>();
        info.epoch = j.at("epoch").get<int>();
        const auto& a = j.at("arch");
        info.arch.kind = a.at("kind").get<std::string>();
        info.arch.in_channels = a.at("in_channels").get<int>();
        info.arch.base_channels = a.at("base_channels").get<int>();
        info.arch.emb_dim = a.at("emb_dim").get<int>();
        info.arch.hidden = a.at("hidden").get<int>();
        for (const auto& p : j.at("params")) {
            info.param_count += p.at("count").get<std::uint64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("checkpoint header is incomplete: ") + e.what(),
                                     h.body_off);
    }
    return info;
}

} // namespace gbmd
