#ifndef SR_SAMPLERS_HPP
#define SR_SAMPLERS_HPP

#include <functional>
#include <stdexcept>
#include <vector>

#include "sr/diffusion.hpp"
#include "sr/image.hpp"
#include "sr/operators.hpp"
#include "sr/scoremodel.hpp"

namespace sr {

/// Annealed Langevin dynamics (warm-started at level n_start).
struct AldParams {
    std::size_t n = 500;       // schedule length
    std::size_t n_start = 230; // first noise level actually visited
    std::size_t inner_iters = 3;
    double lambda = 1.0;       // data-consistency weight in [0,1]
    double eps0 = 2e-5;        // step size at sigma_min; eps_i = eps0*(sigma_i/sigma_min)^2
};

/// Predictor-corrector sampler.
struct PcParams {
    std::size_t n = 250;
    double lambda = 1.0;
    double snr = 0.16; // corrector signal-to-noise ratio r
};

/// Thrown when an iterate goes non-finite; (outer, inner) locate the step.
struct SamplerDivergence : std::runtime_error {
    std::size_t outer, inner;
    SamplerDivergence(std::size_t i, std::size_t j);
};

/// Called every few outer steps with (outer index, current iterate).
using ProgressHook = std::function<void(std::size_t, const Image&)>;

/// Re(x + lambda * A^*(y - A x)); lambda = 0 leaves x unchanged, lambda = 1
/// with a unitary-DFT operator is an exact projection onto {x : A x = y}.
Image data_consistency(const Image& x, const ComplexField& y, const MeasurementOp& op,
                       double lambda);

Image ald_sample(const ScoreModel& model, const ComplexField& y, const MeasurementOp& op,
                 const AldParams& p, const SigmaSchedule& schedule, RngState& rng,
                 const ProgressHook& hook = {});

Image pc_sample(const ScoreModel& model, const ComplexField& y, const MeasurementOp& op,
                const PcParams& p, const SigmaSchedule& schedule, RngState& rng,
                const ProgressHook& hook = {});

/// One pc_sample per lambda, all starting from the same RNG state so runs
/// differ only through the data-consistency weight.
std::vector<Image> lambda_sweep(const ScoreModel& model, const ComplexField& y,
                                const MeasurementOp& op, const std::vector<double>& lambdas,
                                const PcParams& base, const SigmaSchedule& schedule,
                                const RngState& rng);

} // namespace sr

#endif
