#ifndef SR_ANALYSIS_HPP
#define SR_ANALYSIS_HPP

#include <string>
#include <utility>
#include <vector>

#include "sr/image.hpp"

namespace sr {

/// Peak signal-to-noise ratio in dB; peak = max(ref) - min(ref).
/// Returns +infinity when x == ref exactly.
double psnr(const Image& x, const Image& ref);

/// Mean structural similarity, 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range from ref.
double ssim(const Image& x, const Image& ref);

Image mean_image(const std::vector<Image>& dataset);

struct Histogram {
    std::vector<double> bin_edges; // size bins+1, ascending
    std::vector<double> counts;    // size bins
    bool normalized = false;

    double bin_center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }
    /// Per-bin -log(density); +infinity for empty bins.
    std::vector<double> neg_log_density() const;
};

/// Pool every horizontal (resp. vertical) forward difference over the dataset
/// and histogram it on [lo, hi], normalized to unit mass.
std::pair<Histogram, Histogram> grad_neg_log_hist(const std::vector<Image>& dataset,
                                                  std::size_t bins = 101, double lo = -0.35,
                                                  double hi = 0.35);

/// Two columns: bin_center, neg_log_density ("inf" for empty bins).
void save_histogram_csv(const Histogram& h, const std::string& path);

struct MetricsRow {
    std::string id;
    std::string mask;
    double psnr = 0.0;
    double ssim = 0.0;
    double time_s = 0.0;
    bool failed = false;
};

/// One row per slice: id, mask, psnr, ssim, time_s. Failed rows leave the
/// metric cells empty. with_timings=false omits the timing column so the
/// file is byte-reproducible.
void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path,
                      bool with_timings = true);

} // namespace sr

#endif
