#pragma once

#include <Eigen/Core>
#include <string>

#include "bcr/errors.hpp"

namespace bcr {

// Grayscale intensity grid, values in [0,1], row-major.
class ImageSample {
public:
    ImageSample() = default;
    ImageSample(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          pixels_(Eigen::MatrixXd::Constant(height, width, fill)) {
        if (width <= 0 || height <= 0) throw Error("ImageSample: non-positive size");
    }

    int width() const { return width_; }
    int height() const { return height_; }

    double at(int x, int y) const { return pixels_(y, x); }
    void set(int x, int y, double v) { pixels_(y, x) = v; }

    // Nearest-neighbor read with border clamping.
    double sample(double x, double y) const {
        int xi = static_cast<int>(std::lround(x));
        int yi = static_cast<int>(std::lround(y));
        xi = std::clamp(xi, 0, width_ - 1);
        yi = std::clamp(yi, 0, height_ - 1);
        return pixels_(yi, xi);
    }

    Eigen::MatrixXd& pixels() { return pixels_; }
    const Eigen::MatrixXd& pixels() const { return pixels_; }

private:
    int width_ = 0;
    int height_ = 0;
    Eigen::MatrixXd pixels_;
};

// Binary PGM (P5) I/O, 8-bit.
ImageSample load_pgm(const std::string& path);
void save_pgm(const ImageSample& image, const std::string& path);

}  // namespace bcr
