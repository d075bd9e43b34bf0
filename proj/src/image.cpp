#include "sr/image.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sr {

ComplexField::ComplexField(const Image& x) : ComplexField(x.rows, x.cols) {
    for (std::size_t i = 0; i < x.size(); ++i) data[i] = {x.data[i], 0.0};
}

Image ComplexField::real_part() const {
    Image out(rows, cols);
    for (std::size_t i = 0; i < size(); ++i) out.data[i] = data[i].real();
    return out;
}

Image fd_h(const Image& x) {
    Image out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j + 1 < x.cols; ++j)
            out(i, j) = x(i, j + 1) - x(i, j);
    return out;
}

Image fd_v(const Image& x) {
    Image out(x.rows, x.cols);
    for (std::size_t i = 0; i + 1 < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out(i, j) = x(i + 1, j) - x(i, j);
    return out;
}

Image fd_h_adjoint(const Image& g) {
    Image out(g.rows, g.cols);
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j + 1 < g.cols; ++j) {
            out(i, j) -= g(i, j);
            out(i, j + 1) += g(i, j);
        }
    return out;
}

Image fd_v_adjoint(const Image& g) {
    Image out(g.rows, g.cols);
    for (std::size_t i = 0; i + 1 < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) {
            out(i, j) -= g(i, j);
            out(i + 1, j) += g(i, j);
        }
    return out;
}

Image gaussian_field(std::size_t rows, std::size_t cols, RngState& rng) {
    Image out(rows, cols);
    for (auto& v : out.data) v = rng.normal();
    return out;
}

Image operator+(const Image& a, const Image& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("image dimension mismatch");
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Image operator-(const Image& a, const Image& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("image dimension mismatch");
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Image operator*(double s, const Image& a) {
    Image out = a;
    for (auto& v : out.data) v *= s;
    return out;
}

double dot(const Image& a, const Image& b) {
    if (a.size() != b.size()) throw std::invalid_argument("image dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

double norm2(const Image& a) { return std::sqrt(dot(a, a)); }

bool all_finite(const Image& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {
constexpr char kMagic[6] = {'S', 'R', 'I', 'M', 'G', '1'};
}

void save_image(const Image& x, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kMagic, 6);
    std::uint32_t dims[2] = {static_cast<std::uint32_t>(x.rows),
                             static_cast<std::uint32_t>(x.cols)};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    std::vector<float> buf(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = static_cast<float>(x.data[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Image load_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kMagic, 6) != 0)
        throw std::runtime_error("bad magic in " + path);
    std::uint32_t dims[2];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    Image out(dims[0], dims[1]);
    std::vector<float> buf(out.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw std::runtime_error("truncated image file: " + path);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = buf[i];
    return out;
}

} // namespace sr
