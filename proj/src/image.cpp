#include "gbmd/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

namespace {

void check_shape(const Shape3& shape, std::size_t data_size, const char* what) {
    if (shape.channels < 1 || shape.height < 1 || shape.width < 1) {
        throw ShapeError(std::string(what) + ": all shape dimensions must be >= 1");
    }
    if (shape.numel() != data_size) {
        throw ShapeError(std::string(what) + ": data length " + std::to_string(data_size) +
                         " does not match shape product " + std::to_string(shape.numel()));
    }
}

} // namespace

ImageTensor make_image(Shape3 shape, std::vector<double> data) {
    check_shape(shape, data.size(), "make_image");
    for (double v : data) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::domain_error("make_image: intensities must be strictly positive and finite");
        }
    }
    return ImageTensor{shape, std::move(data)};
}

LogImage make_log_image(Shape3 shape, std::vector<double> data) {
    check_shape(shape, data.size(), "make_log_image");
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw std::domain_error("make_log_image: entries must be finite");
        }
    }
    return LogImage{shape, std::move(data)};
}

LogImage log_image(const ImageTensor& x) {
    std::vector<double> out(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        if (!(x.data[i] > 0.0)) {
            throw std::domain_error("log_image: non-positive intensity at index " +
                                    std::to_string(i));
        }
        out[i] = std::log(x.data[i]);
    }
    return LogImage{x.shape, std::move(out)};
}

ImageTensor exp_image(const LogImage& y) {
    std::vector<double> out(y.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        out[i] = std::exp(y.data[i]);
        if (!std::isfinite(out[i]) || !(out[i] > 0.0)) {
            throw std::domain_error("exp_image: non-finite intensity at index " +
                                    std::to_string(i));
        }
    }
    return ImageTensor{y.shape, std::move(out)};
}

ImageTensor scalar_image(double x) { return make_image({1, 1, 1}, {x}); }

LogImage scalar_log_image(double y) { return make_log_image({1, 1, 1}, {y}); }

} // namespace gbmd
