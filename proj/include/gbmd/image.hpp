#pragma once

#include <cstddef>
#include <vector>

namespace gbmd {

struct Shape3 {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    bool operator==(const Shape3&) const = default;
};

// Unconstrained real field over a [C, H, W] grid: noise draws, score values,
// multiplicative factors.
struct Volume {
    Shape3 shape;
    std::vector<double> data;

    static Volume zeros(Shape3 s) { return Volume{s, std::vector<double>(s.numel(), 0.0)}; }
    static Volume full(Shape3 s, double v) { return Volume{s, std::vector<double>(s.numel(), v)}; }
};

// Intensity-domain image. Entries are strictly positive so the logarithm
// exists; clean images from 8-bit sources additionally lie in (0, 1], but
// corrupted intensities may exceed 1 and are only clamped at export.
struct ImageTensor {
    Shape3 shape;
    std::vector<double> data;
};

// Log-domain image, y = log x elementwise. Entries are finite; they are
// <= 0 whenever derived from a unit-range intensity image.
struct LogImage {
    Shape3 shape;
    std::vector<double> data;
};

// Validating constructors. Throw std::domain_error / ShapeError on bad input.
ImageTensor make_image(Shape3 shape, std::vector<double> data);
LogImage make_log_image(Shape3 shape, std::vector<double> data);

// Elementwise transforms between the two coordinate systems.
LogImage log_image(const ImageTensor& x);
ImageTensor exp_image(const LogImage& y);

// Convenience for scalar-field tests: shape [1,1,1] holding one value.
ImageTensor scalar_image(double x);
LogImage scalar_log_image(double y);

} // namespace gbmd
