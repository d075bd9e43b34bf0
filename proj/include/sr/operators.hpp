#ifndef SR_OPERATORS_HPP
#define SR_OPERATORS_HPP

#include <string>
#include <vector>

#include "sr/image.hpp"
#include "sr/rng.hpp"

namespace sr {

/// Binary k-space sampling mask, row-major; true = acquired.
struct KMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<char> keep;

    KMask() = default;
    KMask(std::size_t r, std::size_t c, bool fill = false)
        : rows(r), cols(c), keep(r * c, fill ? 1 : 0) {}

    char& operator()(std::size_t i, std::size_t j) { return keep[i * cols + j]; }
    bool operator()(std::size_t i, std::size_t j) const { return keep[i * cols + j] != 0; }
    std::size_t kept_count() const;
    double kept_fraction() const;
};

/// Strictly increasing projection angles in [0, pi).
struct AngleSet {
    std::vector<double> angles;
};

enum class Modality { MRI, CT };

/// Forward measurement model A with adjoint/pseudo-inverse.
/// MRI: A = mask o unitary DFT.  CT: A = Radon over a sparse angle set.
struct MeasurementOp {
    Modality kind = Modality::MRI;
    KMask mask;           // MRI
    AngleSet angles;      // CT
    std::size_t detectors = 0; // CT

    static MeasurementOp mri(KMask m);
    static MeasurementOp ct(AngleSet a, std::size_t detectors);

    /// y = A x. MRI: masked k-space; CT: sinogram embedded in a ComplexField (real).
    ComplexField forward(const Image& x) const;
    /// Operational adjoint: F^-1 M for MRI, filtered backprojection for CT.
    ComplexField adjoint(const ComplexField& y) const;
    /// Operator norm estimate ||A||_2 (power iteration; exact 1 for MRI).
    double op_norm() const;
};

/// Unitary 2-D DFT (1/sqrt(n) both directions).
ComplexField dft2(const ComplexField& x);
ComplexField dft2(const Image& x);
ComplexField idft2(const ComplexField& x);

ComplexField mri_forward(const Image& x, const KMask& m);
ComplexField mri_forward(const ComplexField& x, const KMask& m);
ComplexField mri_adjoint(const ComplexField& y, const KMask& m);

/// Parallel-beam Radon transform; sinogram rows = |angles|, cols = detectors.
/// Bilinear interpolation, pixel-width ray spacing. Requires a square image.
Image radon(const Image& x, const AngleSet& a, std::size_t detectors);
/// Exact adjoint of radon (inner-product transpose).
Image backproject(const Image& sinogram, const AngleSet& a, std::size_t size);
/// Ram-Lak filtered backprojection; approximate inverse of radon.
Image fbp(const Image& sinogram, const AngleSet& a, std::size_t size);

/// 1D Gaussian phase-encode mask; keeps round(cols/accel) lines in total,
/// floor(cols*center_frac) of them central, the rest drawn without replacement
/// with probability proportional to a Gaussian profile centred at k=0.
KMask mask_gaussian1d(std::size_t rows, std::size_t cols, double accel,
                      double center_frac, RngState& rng);
KMask mask_gaussian2d(std::size_t rows, std::size_t cols, double accel, RngState& rng);
KMask mask_radial(std::size_t rows, std::size_t cols, std::size_t spokes);
KMask mask_poisson_disk(std::size_t rows, std::size_t cols, double accel, RngState& rng);
KMask mask_full(std::size_t rows, std::size_t cols);

/// Equidistant angles theta_k = k*pi/n on the half circle.
AngleSet sparse_view_angles(std::size_t n_theta);

/// Mask persisted in the raw image format with 0/1 entries.
void save_mask(const KMask& m, const std::string& path);
KMask load_mask(const std::string& path);
/// AngleSet persisted as plain text, one radian per line.
void save_angles(const AngleSet& a, const std::string& path);
AngleSet load_angles(const std::string& path);

/// Signed k-space frequency of a column/row index (DC at index 0, unshifted layout).
inline long signed_freq(std::size_t idx, std::size_t n) {
    return idx <= n / 2 ? static_cast<long>(idx)
                        : static_cast<long>(idx) - static_cast<long>(n);
}

} // namespace sr

#endif
