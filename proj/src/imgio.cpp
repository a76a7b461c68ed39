#include "gbmd/imgio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gbmd/errors.hpp"

namespace gbmd {

namespace {

bool pnm_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Netpbm token scanner: skips whitespace and '#' comments, tracks the offset.
struct TokenReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void skip_separators() {
        while (pos < bytes.size()) {
            if (pnm_space(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                return;
            }
        }
    }

    int read_int(const char* what) {
        skip_separators();
        const std::size_t start = pos;
        if (pos >= bytes.size())
            throw ParseError(std::string("pnm: missing ") + what, pos);
        if (bytes[pos] < '0' || bytes[pos] > '9')
            throw ParseError(std::string("pnm: expected digit for ") + what, pos);
        long value = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1 << 26)
                throw ParseError(std::string("pnm: ") + what + " out of range", start);
            ++pos;
        }
        return static_cast<int>(value);
    }
};

} // namespace

RawImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw ParseError("pnm: bad magic, expected P5 or P6", 0);
    const int channels = bytes[1] == '5' ? 1 : 3;
    TokenReader in{bytes, 2};

    const int width = in.read_int("width");
    const int height = in.read_int("height");
    if (width < 1 || height < 1)
        throw ParseError("pnm: dimensions must be positive", in.pos);
    in.skip_separators();
    const std::size_t maxval_at = in.pos;
    const int maxval = in.read_int("maxval");
    if (maxval != 255)
        throw UnsupportedFormatError("pnm: maxval " + std::to_string(maxval) +
                                     " not supported, only 255 (byte offset " +
                                     std::to_string(maxval_at) + ")");
    if (in.pos >= bytes.size() || !pnm_space(bytes[in.pos]))
        throw ParseError("pnm: expected single whitespace after maxval", in.pos);
    ++in.pos; // exactly one separator byte before the payload

    RawImage img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    const std::size_t need =
        static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
    if (bytes.size() - in.pos < need)
        throw ParseError("pnm: truncated payload, need " + std::to_string(need) +
                             " sample bytes, have " + std::to_string(bytes.size() - in.pos),
                         bytes.size());
    img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(in.pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(in.pos + need));
    return img;
}

std::vector<std::uint8_t> encode_pnm(const RawImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ContractError("pnm: channels must be 1 or 3, got " + std::to_string(img.channels));
    if (img.width < 1 || img.height < 1)
        throw ContractError("pnm: image dimensions must be positive");
    const std::size_t need = static_cast<std::size_t>(img.width) *
                             static_cast<std::size_t>(img.height) * img.channels;
    if (img.samples.size() != need)
        throw ContractError("pnm: sample count " + std::to_string(img.samples.size()) +
                            " does not match dimensions (need " + std::to_string(need) + ")");
    const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width) + " " + std::to_string(img.height) +
                               "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), img.samples.begin(), img.samples.end());
    return bytes;
}

RawImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open image file " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    return decode_pnm(bytes);
}

void write_pnm(const RawImage& img, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing " + path.string());
}

ImageTensor to_intensity(const RawImage& raw) {
    ImageTensor x;
    x.shape = {raw.channels, raw.height, raw.width};
    x.data.resize(x.shape.numel());
    const std::size_t plane = static_cast<std::size_t>(raw.height) * raw.width;
    for (int c = 0; c < raw.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            x.data[static_cast<std::size_t>(c) * plane + i] =
                (raw.samples[i * raw.channels + static_cast<std::size_t>(c)] + 1.0) / 256.0;
    return x;
}

RawImage from_intensity(const ImageTensor& x) {
    if (x.shape.channels != 1 && x.shape.channels != 3)
        throw ContractError("from_intensity: channels must be 1 or 3, got " +
                            std::to_string(x.shape.channels));
    RawImage raw;
    raw.width = x.shape.width;
    raw.height = x.shape.height;
    raw.channels = x.shape.channels;
    raw.samples.resize(x.shape.numel());
    const std::size_t plane = static_cast<std::size_t>(raw.height) * raw.width;
    for (int c = 0; c < raw.channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = x.data[static_cast<std::size_t>(c) * plane + i];
            if (!std::isfinite(v))
                throw std::domain_error("from_intensity: non-finite intensity");
            const double p = std::round(256.0 * v - 1.0);
            const double clamped = std::min(255.0, std::max(0.0, p));
            raw.samples[i * raw.channels + static_cast<std::size_t>(c)] =
                static_cast<std::uint8_t>(clamped);
        }
    }
    return raw;
}

namespace {

bool pnm_extension(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

std::vector<std::filesystem::path> sorted_pnm_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("dataset directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && pnm_extension(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
    if (files.empty()) throw ConfigError("no PNM files in " + dir.string());
    return files;
}

} // namespace

DatasetStream::DatasetStream(const std::filesystem::path& dir, int patch, std::uint64_t seed)
    : patch_(patch), rng_(seed, 0) {
    if (patch < 1) throw ConfigError("patch size must be positive");
    std::vector<std::filesystem::path> files = sorted_pnm_files(dir);

    std::vector<ImageTensor> loaded;
    std::vector<std::size_t> order;
    for (const auto& f : files) {
        try {
            const ImageTensor img = to_intensity(read_pnm(f));
            if (img.shape.height < patch || img.shape.width < patch) {
                warnings_.push_back("skipping " + f.filename().string() + ": smaller than patch");
                continue;
            }
            order.push_back(loaded.size());
            loaded.push_back(img);
        } catch (const std::exception& e) {
            warnings_.push_back("skipping " + f.filename().string() + ": " + e.what());
        }
    }
    if (loaded.empty())
        throw ConfigError("no usable images in " + dir.string() +
                          (warnings_.empty() ? "" : " (" + std::to_string(warnings_.size()) +
                                                        " skipped)"));

    // One deterministic shuffle of the lexicographic order, then uniform draws.
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng_.below(i)]);
    images_.reserve(loaded.size());
    for (std::size_t idx : order) images_.push_back(std::move(loaded[idx]));
}

ImageTensor DatasetStream::next() {
    const ImageTensor& src = images_[rng_.below(images_.size())];
    const int max_r = src.shape.height - patch_;
    const int max_c = src.shape.width - patch_;
    const int r0 = max_r == 0 ? 0 : static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_r) + 1));
    const int c0 = max_c == 0 ? 0 : static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_c) + 1));

    ImageTensor out;
    out.shape = {src.shape.channels, patch_, patch_};
    out.data.resize(out.shape.numel());
    const std::size_t src_plane =
        static_cast<std::size_t>(src.shape.height) * src.shape.width;
    const std::size_t dst_plane = static_cast<std::size_t>(patch_) * patch_;
    for (int c = 0; c < src.shape.channels; ++c)
        for (int i = 0; i < patch_; ++i)
            for (int j = 0; j < patch_; ++j)
                out.data[c * dst_plane + static_cast<std::size_t>(i) * patch_ + j] =
                    src.data[c * src_plane +
                             static_cast<std::size_t>(r0 + i) * src.shape.width + (c0 + j)];
    return out;
}

std::vector<ImageTensor> draw_patches(DatasetStream& stream, int count) {
    std::vector<ImageTensor> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(stream.next());
    return out;
}

std::vector<ImageTensor> load_directory(const std::filesystem::path& dir,
                                        std::vector<std::string>* names) {
    std::vector<ImageTensor> out;
    for (const auto& f : sorted_pnm_files(dir)) {
        out.push_back(to_intensity(read_pnm(f)));
        if (names) names->push_back(f.filename().string());
    }
    return out;
}

} // namespace gbmd
