#ifndef SR_IMAGE_HPP
#define SR_IMAGE_HPP

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "sr/rng.hpp"

namespace sr {

/// Real-valued pixel grid, row-major.
struct Image {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::size_t size() const { return rows * cols; }
};

/// Complex-valued grid, row-major; holds k-space data and intermediates.
struct ComplexField {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::complex<double>> data;

    ComplexField() = default;
    ComplexField(std::size_t r, std::size_t c)
        : rows(r), cols(c), data(r * c, {0.0, 0.0}) {}
    explicit ComplexField(const Image& x);

    std::complex<double>& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    std::complex<double> operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::size_t size() const { return rows * cols; }

    Image real_part() const;
};

/// Horizontal forward difference, zero in the last column (Neumann boundary).
Image fd_h(const Image& x);
/// Vertical forward difference, zero in the last row.
Image fd_v(const Image& x);
/// Transpose (adjoint) of fd_h, needed for divergence-style gradients.
Image fd_h_adjoint(const Image& g);
Image fd_v_adjoint(const Image& g);

/// i.i.d. standard normal field; advances rng deterministically.
Image gaussian_field(std::size_t rows, std::size_t cols, RngState& rng);

// Elementwise helpers used across the pipeline.
Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
Image operator*(double s, const Image& a);
double dot(const Image& a, const Image& b);
double norm2(const Image& a);
bool all_finite(const Image& a);

/// Raw file format: magic "SRIMG1", u32 rows, u32 cols, float32 data, little endian.
void save_image(const Image& x, const std::string& path);
Image load_image(const std::string& path);

} // namespace sr

#endif
