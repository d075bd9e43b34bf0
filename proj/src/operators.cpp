#include "sr/operators.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace sr {

std::size_t KMask::kept_count() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
}

double KMask::kept_fraction() const {
    return static_cast<double>(kept_count()) / static_cast<double>(rows * cols);
}

// ---------------------------------------------------------------------------
// Unitary DFT
// ---------------------------------------------------------------------------

namespace {

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

ComplexField fft2_impl(const ComplexField& x, int sign) {
    ComplexField out = x;
    auto* buf = reinterpret_cast<fftw_complex*>(out.data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        plan = fftw_plan_dft_2d(static_cast<int>(x.rows), static_cast<int>(x.cols),
                                buf, buf, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
    double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : out.data) v *= scale;
    return out;
}

} // namespace

ComplexField dft2(const ComplexField& x) {
    if (x.rows < 1 || x.cols < 1) throw std::invalid_argument("dft2: empty input");
    return fft2_impl(x, FFTW_FORWARD);
}

ComplexField dft2(const Image& x) { return dft2(ComplexField(x)); }

ComplexField idft2(const ComplexField& x) {
    if (x.rows < 1 || x.cols < 1) throw std::invalid_argument("idft2: empty input");
    return fft2_impl(x, FFTW_BACKWARD);
}

ComplexField mri_forward(const ComplexField& x, const KMask& m) {
    if (x.rows != m.rows || x.cols != m.cols)
        throw std::invalid_argument("mri_forward: mask dimension mismatch");
    ComplexField y = dft2(x);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!m.keep[i]) y.data[i] = {0.0, 0.0};
    return y;
}

ComplexField mri_forward(const Image& x, const KMask& m) {
    return mri_forward(ComplexField(x), m);
}

ComplexField mri_adjoint(const ComplexField& y, const KMask& m) {
    if (y.rows != m.rows || y.cols != m.cols)
        throw std::invalid_argument("mri_adjoint: mask dimension mismatch");
    ComplexField masked = y;
    for (std::size_t i = 0; i < masked.size(); ++i)
        if (!m.keep[i]) masked.data[i] = {0.0, 0.0};
    return idft2(masked);
}

// ---------------------------------------------------------------------------
// Radon transform and friends
// ---------------------------------------------------------------------------

namespace {

inline double ray_halfspan(std::size_t n) {
    return std::ceil(static_cast<double>(n) * M_SQRT1_2) + 1.0;
}

// Shared ray walk so that backproject is the exact transpose of radon.
template <typename Visit>
void walk_rays(std::size_t n, const AngleSet& a, std::size_t detectors, Visit&& visit) {
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    const double t0 = (static_cast<double>(detectors) - 1.0) / 2.0;
    const double smax = ray_halfspan(n);
    for (std::size_t ai = 0; ai < a.angles.size(); ++ai) {
        const double th = a.angles[ai];
        const double ux = std::cos(th), uy = std::sin(th);
        const double vx = -uy, vy = ux;
        for (std::size_t d = 0; d < detectors; ++d) {
            const double t = static_cast<double>(d) - t0;
            for (double s = -smax; s <= smax; s += 1.0) {
                const double px = c + t * ux + s * vx;
                const double py = c + t * uy + s * vy;
                const double fx = std::floor(px), fy = std::floor(py);
                const long jx = static_cast<long>(fx), iy = static_cast<long>(fy);
                const double wx = px - fx, wy = py - fy;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj) {
                        const long ii = iy + di, jj = jx + dj;
                        if (ii < 0 || jj < 0 || ii >= static_cast<long>(n) ||
                            jj >= static_cast<long>(n))
                            continue;
                        const double w = (di ? wy : 1.0 - wy) * (dj ? wx : 1.0 - wx);
                        visit(ai, d, static_cast<std::size_t>(ii),
                              static_cast<std::size_t>(jj), w);
                    }
            }
        }
    }
}

void check_angles(const AngleSet& a) {
    if (a.angles.empty()) throw std::invalid_argument("empty angle set");
    for (std::size_t i = 0; i < a.angles.size(); ++i) {
        if (a.angles[i] < 0.0 || a.angles[i] >= M_PI)
            throw std::invalid_argument("angles must lie in [0, pi)");
        if (i > 0 && a.angles[i] <= a.angles[i - 1])
            throw std::invalid_argument("angles must be strictly increasing");
    }
}

} // namespace

Image radon(const Image& x, const AngleSet& a, std::size_t detectors) {
    if (x.rows != x.cols) throw std::invalid_argument("radon: image must be square");
    check_angles(a);
    Image sino(a.angles.size(), detectors);
    walk_rays(x.rows, a, detectors,
              [&](std::size_t ai, std::size_t d, std::size_t i, std::size_t j, double w) {
                  sino(ai, d) += w * x(i, j);
              });
    return sino;
}

Image backproject(const Image& sinogram, const AngleSet& a, std::size_t size) {
    check_angles(a);
    if (sinogram.rows != a.angles.size())
        throw std::invalid_argument("backproject: sinogram rows != |angles|");
    Image out(size, size);
    walk_rays(size, a, sinogram.cols,
              [&](std::size_t ai, std::size_t d, std::size_t i, std::size_t j, double w) {
                  out(i, j) += w * sinogram(ai, d);
              });
    return out;
}

Image fbp(const Image& sinogram, const AngleSet& a, std::size_t size) {
    if (a.angles.size() < 2)
        throw std::invalid_argument("fbp: need at least 2 angles");
    check_angles(a);
    const std::size_t D = sinogram.cols;
    // Ram-Lak kernel in the spatial domain (detector spacing 1).
    std::vector<double> h(2 * D - 1, 0.0);
    for (long k = -static_cast<long>(D) + 1; k < static_cast<long>(D); ++k) {
        double& hk = h[static_cast<std::size_t>(k + static_cast<long>(D) - 1)];
        if (k == 0)
            hk = 0.25;
        else if (k % 2 != 0)
            hk = -1.0 / (M_PI * M_PI * static_cast<double>(k) * static_cast<double>(k));
    }
    Image filtered(sinogram.rows, D);
    for (std::size_t ai = 0; ai < sinogram.rows; ++ai)
        for (std::size_t d = 0; d < D; ++d) {
            double acc = 0.0;
            for (std::size_t m = 0; m < D; ++m)
                acc += sinogram(ai, m) * h[d - m + D - 1];
            filtered(ai, d) = acc;
        }
    Image out = backproject(filtered, a, size);
    const double scale = M_PI / static_cast<double>(a.angles.size());
    for (auto& v : out.data) v *= scale;
    return out;
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

KMask mask_full(std::size_t rows, std::size_t cols) { return KMask(rows, cols, true); }

KMask mask_gaussian1d(std::size_t rows, std::size_t cols, double accel,
                      double center_frac, RngState& rng) {
    if (accel < 1.0) throw std::invalid_argument("mask_gaussian1d: accel must be >= 1");
    if (center_frac < 0.0 || center_frac >= 1.0)
        throw std::invalid_argument("mask_gaussian1d: center_frac must be in [0, 1)");
    const std::size_t total = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(cols) / accel)));
    std::size_t n_center =
        std::min(total, static_cast<std::size_t>(std::floor(static_cast<double>(cols) * center_frac)));

    std::vector<char> kept(cols, 0);
    // Central lines: smallest |signed frequency| first.
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(signed_freq(a, cols)) < std::abs(signed_freq(b, cols));
    });
    for (std::size_t k = 0; k < n_center; ++k) kept[order[k]] = 1;

    const double sigma = static_cast<double>(cols) / 6.0;
    std::vector<double> w(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        const double f = static_cast<double>(signed_freq(j, cols));
        w[j] = std::exp(-f * f / (2.0 * sigma * sigma));
    }
    std::size_t n_kept = n_center;
    while (n_kept < total) {
        double wsum = 0.0;
        for (std::size_t j = 0; j < cols; ++j)
            if (!kept[j]) wsum += w[j];
        double u = rng.uniform() * wsum;
        std::size_t pick = cols; // sentinel
        for (std::size_t j = 0; j < cols; ++j) {
            if (kept[j]) continue;
            u -= w[j];
            if (u <= 0.0) {
                pick = j;
                break;
            }
        }
        if (pick == cols) { // numerical edge; take the last free column
            for (std::size_t j = cols; j-- > 0;)
                if (!kept[j]) {
                    pick = j;
                    break;
                }
        }
        kept[pick] = 1;
        ++n_kept;
    }

    KMask m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = kept[j];
    return m;
}

KMask mask_gaussian2d(std::size_t rows, std::size_t cols, double accel, RngState& rng) {
    if (accel < 1.0) throw std::invalid_argument("mask_gaussian2d: accel must be >= 1");
    const double target = static_cast<double>(rows * cols) / accel;
    const double sigma = static_cast<double>(std::min(rows, cols)) / 6.0;
    std::vector<double> g(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double fy = static_cast<double>(signed_freq(i, rows));
            const double fx = static_cast<double>(signed_freq(j, cols));
            g[i * cols + j] = std::exp(-(fx * fx + fy * fy) / (2.0 * sigma * sigma));
        }
    // Scale the profile so that the expected kept count matches the target.
    double lo = 0.0, hi = accel * 16.0 + 16.0;
    for (int it = 0; it < 80; ++it) {
        const double c = 0.5 * (lo + hi);
        double s = 0.0;
        for (double v : g) s += std::min(1.0, c * v);
        (s < target ? lo : hi) = c;
    }
    const double c = 0.5 * (lo + hi);
    KMask m(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i)
        m.keep[i] = rng.uniform() < std::min(1.0, c * g[i]) ? 1 : 0;
    m.keep[0] = 1; // always acquire DC
    return m;
}

KMask mask_radial(std::size_t rows, std::size_t cols, std::size_t spokes) {
    if (spokes == 0) throw std::invalid_argument("mask_radial: need at least one spoke");
    KMask m(rows, cols);
    const double cy = static_cast<double>(rows) / 2.0;
    const double cx = static_cast<double>(cols) / 2.0;
    const double rmax = std::hypot(cy, cx) + 1.0;
    for (std::size_t k = 0; k < spokes; ++k) {
        const double th = static_cast<double>(k) * M_PI / static_cast<double>(spokes);
        for (double r = -rmax; r <= rmax; r += 0.5) {
            const long i = std::lround(cy + r * std::sin(th));
            const long j = std::lround(cx + r * std::cos(th));
            if (i < 0 || j < 0 || i >= static_cast<long>(rows) || j >= static_cast<long>(cols))
                continue;
            // Shifted (centre-at-middle) drawing, stored in unshifted layout.
            const std::size_t iu = (static_cast<std::size_t>(i) + rows - rows / 2) % rows;
            const std::size_t ju = (static_cast<std::size_t>(j) + cols - cols / 2) % cols;
            m(iu, ju) = 1;
        }
    }
    return m;
}

namespace {

// One dart-throwing pass at fixed radius; returns kept points in shifted coords.
std::vector<std::pair<long, long>> poisson_darts(std::size_t rows, std::size_t cols,
                                                 double radius, double center_radius,
                                                 RngState& rng) {
    const double cell = radius / M_SQRT2;
    const std::size_t gr = static_cast<std::size_t>(std::ceil(rows / cell)) + 1;
    const std::size_t gc = static_cast<std::size_t>(std::ceil(cols / cell)) + 1;
    std::vector<long> grid(gr * gc, -1);
    std::vector<std::pair<long, long>> pts;
    const double cy = static_cast<double>(rows) / 2.0;
    const double cx = static_cast<double>(cols) / 2.0;
    auto near_center = [&](long i, long j) {
        return std::hypot(i - cy, j - cx) <= center_radius;
    };
    auto try_add = [&](long i, long j) {
        if (near_center(i, j)) return; // handled separately
        const std::size_t gi = static_cast<std::size_t>(i / cell);
        const std::size_t gj = static_cast<std::size_t>(j / cell);
        for (long di = -2; di <= 2; ++di)
            for (long dj = -2; dj <= 2; ++dj) {
                const long ni = static_cast<long>(gi) + di, nj = static_cast<long>(gj) + dj;
                if (ni < 0 || nj < 0 || ni >= static_cast<long>(gr) || nj >= static_cast<long>(gc))
                    continue;
                const long p = grid[static_cast<std::size_t>(ni) * gc + static_cast<std::size_t>(nj)];
                if (p >= 0) {
                    const auto& q = pts[static_cast<std::size_t>(p)];
                    if (std::hypot(i - q.first, j - q.second) < radius) return;
                }
            }
        grid[gi * gc + gj] = static_cast<long>(pts.size());
        pts.emplace_back(i, j);
    };
    const std::size_t attempts = 40 * rows * cols / std::max<std::size_t>(1, std::size_t(radius * radius));
    for (std::size_t t = 0; t < attempts; ++t) {
        const long i = static_cast<long>(rng.uniform_below(rows));
        const long j = static_cast<long>(rng.uniform_below(cols));
        try_add(i, j);
    }
    return pts;
}

} // namespace

KMask mask_poisson_disk(std::size_t rows, std::size_t cols, double accel, RngState& rng) {
    if (accel < 1.0) throw std::invalid_argument("mask_poisson_disk: accel must be >= 1");
    const double center_radius = 3.0;
    const double target = static_cast<double>(rows * cols) / accel;
    double radius = std::sqrt(0.68 * accel);
    std::vector<std::pair<long, long>> best;
    double best_err = 1e30;
    double best_radius = radius;
    for (int it = 0; it < 6; ++it) {
        auto pts = poisson_darts(rows, cols, radius, center_radius, rng);
        const double count = static_cast<double>(pts.size());
        const double err = std::abs(count - target) / target;
        if (err < best_err) {
            best_err = err;
            best = std::move(pts);
            best_radius = radius;
        }
        if (best_err < 0.03) break;
        radius *= std::sqrt(count / target);
    }
    (void)best_radius;
    KMask m(rows, cols);
    const double cy = static_cast<double>(rows) / 2.0;
    const double cx = static_cast<double>(cols) / 2.0;
    auto put = [&](long i, long j) {
        const std::size_t iu = (static_cast<std::size_t>(i) + rows - rows / 2) % rows;
        const std::size_t ju = (static_cast<std::size_t>(j) + cols - cols / 2) % cols;
        m(iu, ju) = 1;
    };
    for (const auto& p : best) put(p.first, p.second);
    for (long i = 0; i < static_cast<long>(rows); ++i)
        for (long j = 0; j < static_cast<long>(cols); ++j)
            if (std::hypot(i - cy, j - cx) <= center_radius) put(i, j);
    return m;
}

AngleSet sparse_view_angles(std::size_t n_theta) {
    if (n_theta == 0) throw std::invalid_argument("sparse_view_angles: n_theta must be >= 1");
    AngleSet a;
    a.angles.resize(n_theta);
    for (std::size_t k = 0; k < n_theta; ++k)
        a.angles[k] = static_cast<double>(k) * M_PI / static_cast<double>(n_theta);
    return a;
}

// ---------------------------------------------------------------------------
// MeasurementOp
// ---------------------------------------------------------------------------

MeasurementOp MeasurementOp::mri(KMask m) {
    MeasurementOp op;
    op.kind = Modality::MRI;
    op.mask = std::move(m);
    return op;
}

MeasurementOp MeasurementOp::ct(AngleSet a, std::size_t detectors) {
    check_angles(a);
    MeasurementOp op;
    op.kind = Modality::CT;
    op.angles = std::move(a);
    op.detectors = detectors;
    return op;
}

ComplexField MeasurementOp::forward(const Image& x) const {
    if (kind == Modality::MRI) return mri_forward(x, mask);
    return ComplexField(radon(x, angles, detectors));
}

ComplexField MeasurementOp::adjoint(const ComplexField& y) const {
    if (kind == Modality::MRI) return mri_adjoint(y, mask);
    // CT uses the approximate-inverse adjoint (FBP) rather than the exact transpose,
    // so data-consistency updates stay in image-intensity scale.
    Image sino = y.real_part();
    std::size_t size = detectors;
    return ComplexField(fbp(sino, angles, size));
}

double MeasurementOp::op_norm() const {
    if (kind == Modality::MRI) return 1.0;
    RngState rng(0x5eed);
    std::size_t n = detectors;
    Image v = gaussian_field(n, n, rng);
    double nv = norm2(v);
    for (auto& t : v.data) t /= nv;
    double lambda = 1.0;
    for (int it = 0; it < 20; ++it) {
        Image w = backproject(radon(v, angles, detectors), angles, n);
        lambda = norm2(w);
        for (std::size_t i = 0; i < w.size(); ++i) v.data[i] = w.data[i] / lambda;
    }
    return std::sqrt(lambda);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void save_mask(const KMask& m, const std::string& path) {
    Image img(m.rows, m.cols);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = m.keep[i] ? 1.0 : 0.0;
    save_image(img, path);
}

KMask load_mask(const std::string& path) {
    Image img = load_image(path);
    KMask m(img.rows, img.cols);
    for (std::size_t i = 0; i < img.size(); ++i) m.keep[i] = img.data[i] > 0.5 ? 1 : 0;
    if (m.kept_count() == 0) throw std::runtime_error("mask has no kept entries: " + path);
    return m;
}

void save_angles(const AngleSet& a, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.precision(17);
    for (double th : a.angles) f << th << '\n';
}

AngleSet load_angles(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    AngleSet a;
    double th;
    while (f >> th) a.angles.push_back(th);
    check_angles(a);
    return a;
}

} // namespace sr
