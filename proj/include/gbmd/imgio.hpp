#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gbmd/image.hpp"
#include "gbmd/rng.hpp"

namespace gbmd {

// 8-bit image as stored on disk: row-major, channels interleaved (1 or 3).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> samples;
};

// Binary PGM (P5) / PPM (P6), maxval 255 only. Parse failures carry the byte
// offset; a 16-bit maxval is reported as an unsupported format, not a parse
// error.
RawImage read_pnm(const std::filesystem::path& path);
void write_pnm(const RawImage& img, const std::filesystem::path& path);

// Buffer-level codecs backing the file functions (and their tests).
RawImage decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const RawImage& img);

// Pixel mapping x = (p + 1) / 256, so intensities live in [1/256, 1] and the
// logarithm is always defined. Inverse p = clamp(round(256 x - 1), 0, 255);
// values outside the unit range (possible after corruption) clamp at export.
ImageTensor to_intensity(const RawImage& raw);
RawImage from_intensity(const ImageTensor& x);

// Deterministic stream of patch x patch crops over the PNM files in a
// directory. Files are sorted lexicographically, then the file order is
// shuffled once from the seed; each draw picks a file and a uniform crop
// origin. Unreadable or too-small files are skipped with a warning.
class DatasetStream {
public:
    DatasetStream(const std::filesystem::path& dir, int patch, std::uint64_t seed);

    ImageTensor next();
    std::size_t file_count() const { return images_.size(); }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::vector<ImageTensor> images_;
    std::vector<std::string> warnings_;
    int patch_;
    RandomSource rng_;
};

// Convenience: materialize a fixed number of draws.
std::vector<ImageTensor> draw_patches(DatasetStream& stream, int count);

// Load every PNM in a directory (sorted by filename) as full images.
// Returns parallel name/image vectors via out parameters.
std::vector<ImageTensor> load_directory(const std::filesystem::path& dir,
                                        std::vector<std::string>* names = nullptr);

} // namespace gbmd
