#ifndef SR_DIFFUSION_HPP
#define SR_DIFFUSION_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "sr/image.hpp"
#include "sr/rng.hpp"
#include "sr/scorenet.hpp"

namespace sr {

/// Geometric noise ladder sigma_1 < ... < sigma_n of the variance-exploding
/// SDE. Stored 0-based; sigma(i) is the (i+1)-th level.
struct SigmaSchedule {
    std::vector<double> sigmas;

    std::size_t size() const { return sigmas.size(); }
    double sigma(std::size_t i) const { return sigmas.at(i); }
    double min() const { return sigmas.front(); }
    double max() const { return sigmas.back(); }
};

/// sigmas[i] = sigma_min * (sigma_max/sigma_min)^(i/(n-1)), i = 0..n-1.
SigmaSchedule make_schedule(std::size_t n, double sigma_min, double sigma_max);

/// Draw x0 + sigma * z with z an i.i.d. standard normal field.
Image perturb(const Image& x0, double sigma, RngState& rng);

/// Denoising score matching loss: for each batch element draw a schedule index
/// uniformly and a perturbation x_t, then average
///   sigma^2 * sum_pixels (s(x_t, sigma) - (x0 - x_t)/sigma^2)^2
/// over the batch.
double dsm_loss(const ScoreModel& model, const std::vector<Image>& batch,
                const SigmaSchedule& schedule, RngState& rng);

struct TrainConfig {
    std::size_t iterations = 10000;
    double lr_peak = 2e-4;
    std::size_t warmup_iters = 5000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double grad_clip = 1.0;
    double ema_rate = 0.999;
    std::size_t batch = 8;

    void validate() const;
};

struct TrainResult {
    std::vector<double> ema_params;
    std::vector<std::pair<std::size_t, double>> loss_trace; // (iteration, loss)
};

/// Adam with linear warmup, global-norm gradient clipping, and an exponential
/// moving average of the parameters. The model is updated in place; the EMA
/// copy is returned. Throws std::runtime_error naming the iteration if the
/// loss becomes non-finite.
TrainResult train(ScoreNet& model, const std::vector<Image>& dataset, const TrainConfig& cfg,
                  const SigmaSchedule& schedule, RngState& rng);

void save_loss_trace(const std::vector<std::pair<std::size_t, double>>& trace,
                     const std::string& path);

/// Checkpoint blob: magic "SRCKPT1", network config echo, fixed Fourier
/// frequencies, flat parameter array and EMA array.
void save_checkpoint(const ScoreNet& model, const std::vector<double>& ema_params,
                     const std::string& path);

struct Checkpoint {
    NetConfig cfg;
    std::size_t rows = 0, cols = 0;
    std::vector<double> fourier_freqs;
    std::vector<double> params;
    std::vector<double> ema_params;

    /// Rebuild the network (with EMA weights when use_ema is set).
    std::unique_ptr<ScoreNet> instantiate(bool use_ema = true) const;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace sr

#endif
