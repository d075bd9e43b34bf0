#include "sr/analysis.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace sr {

double psnr(const Image& x, const Image& ref) {
    if (x.rows != ref.rows || x.cols != ref.cols)
        throw std::invalid_argument("psnr: dimension mismatch");
    double lo = ref.data[0], hi = ref.data[0], mse = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        lo = std::min(lo, ref.data[i]);
        hi = std::max(hi, ref.data[i]);
        const double d = x.data[i] - ref.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ref.size());
    const double peak = hi - lo;
    if (peak <= 0.0) throw std::invalid_argument("psnr: reference is constant");
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& x, const Image& ref) {
    if (x.rows != ref.rows || x.cols != ref.cols)
        throw std::invalid_argument("ssim: dimension mismatch");
    constexpr std::size_t W = 11;
    if (x.rows < W || x.cols < W)
        throw std::invalid_argument("ssim: image must be at least 11x11");
    // 11x11 Gaussian window, sigma 1.5, normalized.
    double win[W][W];
    double wsum = 0.0;
    for (std::size_t i = 0; i < W; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            const double di = static_cast<double>(i) - 5.0, dj = static_cast<double>(j) - 5.0;
            win[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
            wsum += win[i][j];
        }
    for (std::size_t i = 0; i < W; ++i)
        for (std::size_t j = 0; j < W; ++j) win[i][j] /= wsum;

    double lo = ref.data[0], hi = ref.data[0];
    for (double v : ref.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    if (range <= 0.0) throw std::invalid_argument("ssim: reference is constant");
    const double c1 = 0.01 * range * 0.01 * range;
    const double c2 = 0.03 * range * 0.03 * range;

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + W <= x.rows; ++r)
        for (std::size_t c = 0; c + W <= x.cols; ++c) {
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < W; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    mx += win[i][j] * x(r + i, c + j);
                    my += win[i][j] * ref(r + i, c + j);
                }
            double vx = 0.0, vy = 0.0, cxy = 0.0;
            for (std::size_t i = 0; i < W; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    const double dx = x(r + i, c + j) - mx;
                    const double dy = ref(r + i, c + j) - my;
                    vx += win[i][j] * dx * dx;
                    vy += win[i][j] * dy * dy;
                    cxy += win[i][j] * dx * dy;
                }
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

Image mean_image(const std::vector<Image>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("mean_image: empty dataset");
    Image acc(dataset[0].rows, dataset[0].cols);
    for (const Image& x : dataset) {
        if (x.rows != acc.rows || x.cols != acc.cols)
            throw std::invalid_argument("mean_image: dimension mismatch in dataset");
        for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += x.data[i];
    }
    const double inv = 1.0 / static_cast<double>(dataset.size());
    for (double& v : acc.data) v *= inv;
    return acc;
}

std::vector<double> Histogram::neg_log_density() const {
    const std::size_t bins = counts.size();
    std::vector<double> out(bins);
    double mass = 0.0;
    for (std::size_t i = 0; i < bins; ++i) mass += counts[i] * (bin_edges[i + 1] - bin_edges[i]);
    for (std::size_t i = 0; i < bins; ++i) {
        const double density = normalized ? counts[i] : counts[i] / mass;
        out[i] = density > 0.0 ? -std::log(density) : std::numeric_limits<double>::infinity();
    }
    return out;
}

namespace {

Histogram histogram_of(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
    Histogram h;
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0.0);
    const double width = (hi - lo) / static_cast<double>(bins);
    std::size_t in_range = 0;
    for (double v : values) {
        if (v < lo || v >= hi) {
            if (v == hi) { // closed right edge of the last bin
                h.counts[bins - 1] += 1.0;
                ++in_range;
            }
            continue;
        }
        auto b = static_cast<std::size_t>((v - lo) / width);
        if (b >= bins) b = bins - 1;
        h.counts[b] += 1.0;
        ++in_range;
    }
    if (in_range > 0) {
        const double norm = 1.0 / (static_cast<double>(in_range) * width);
        for (double& c : h.counts) c *= norm;
        h.normalized = true;
    }
    return h;
}

} // namespace

std::pair<Histogram, Histogram> grad_neg_log_hist(const std::vector<Image>& dataset,
                                                  std::size_t bins, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("grad_neg_log_hist: need lo < hi");
    if (bins == 0) throw std::invalid_argument("grad_neg_log_hist: need at least one bin");
    std::vector<double> hvals, vvals;
    for (const Image& x : dataset) {
        const Image gh = fd_h(x);
        const Image gv = fd_v(x);
        hvals.insert(hvals.end(), gh.data.begin(), gh.data.end());
        vvals.insert(vvals.end(), gv.data.begin(), gv.data.end());
    }
    return {histogram_of(hvals, bins, lo, hi), histogram_of(vvals, bins, lo, hi)};
}

void save_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_histogram_csv: cannot open " + path);
    f << "bin_center,neg_log_density\n";
    f.precision(12);
    const auto nld = h.neg_log_density();
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        f << h.bin_center(i) << ",";
        if (std::isinf(nld[i]))
            f << "inf";
        else
            f << nld[i];
        f << "\n";
    }
    if (!f) throw std::runtime_error("save_histogram_csv: write failed for " + path);
}

void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path,
                      bool with_timings) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_metrics_csv: cannot open " + path);
    f << (with_timings ? "id,mask,psnr,ssim,time_s\n" : "id,mask,psnr,ssim\n");
    f.precision(12);
    for (const auto& r : rows) {
        f << r.id << "," << r.mask << ",";
        if (r.failed)
            f << ","; // empty metric cells, not zeros
        else
            f << r.psnr << "," << r.ssim;
        if (with_timings) f << "," << r.time_s;
        f << "\n";
    }
    if (!f) throw std::runtime_error("save_metrics_csv: write failed for " + path);
}

} // namespace sr
