#include "sr/samplers.hpp"

#include <cmath>
#include <string>

namespace sr {

SamplerDivergence::SamplerDivergence(std::size_t i, std::size_t j)
    : std::runtime_error("sampler diverged at outer step " + std::to_string(i) +
                         ", inner step " + std::to_string(j)),
      outer(i), inner(j) {}

Image data_consistency(const Image& x, const ComplexField& y, const MeasurementOp& op,
                       double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("data_consistency: lambda must be in [0,1]");
    if (lambda == 0.0) return x;
    ComplexField r = op.forward(x);
    if (r.rows != y.rows || r.cols != y.cols)
        throw std::invalid_argument("data_consistency: measurement dimension mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] = y.data[i] - r.data[i];
    const Image corr = op.adjoint(r).real_part();
    Image out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] + lambda * corr.data[i];
    return out;
}

namespace {

// -lambda * Re(A^*(A x - y)) / gamma^2, the measurement drift of the
// annealed Langevin update.
Image measurement_drift(const Image& x, const ComplexField& y, const MeasurementOp& op,
                        double lambda, double gamma) {
    ComplexField r = op.forward(x);
    if (r.rows != y.rows || r.cols != y.cols)
        throw std::invalid_argument("sampler: measurement dimension mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= y.data[i];
    Image d = op.adjoint(r).real_part();
    const double s = -lambda / (gamma * gamma);
    for (double& v : d.data) v *= s;
    return d;
}

void check_finite(const Image& x, std::size_t i, std::size_t j) {
    if (!all_finite(x)) throw SamplerDivergence(i, j);
}

} // namespace

Image ald_sample(const ScoreModel& model, const ComplexField& y, const MeasurementOp& op,
                 const AldParams& p, const SigmaSchedule& schedule, RngState& rng,
                 const ProgressHook& hook) {
    if (schedule.size() != p.n)
        throw std::invalid_argument("ald_sample: schedule length does not match n");
    if (p.n_start > p.n) throw std::invalid_argument("ald_sample: n_start must be <= n");
    if (p.lambda < 0.0 || p.lambda > 1.0)
        throw std::invalid_argument("ald_sample: lambda must be in [0,1]");
    Image x = gaussian_field(model.rows(), model.cols(), rng);
    bool stepped = false;
    for (std::size_t i = p.n_start; i-- > 0;) {
        const double sigma = schedule.sigma(i);
        const double eps = p.eps0 * (sigma / schedule.min()) * (sigma / schedule.min());
        const double noise_scale = std::sqrt(2.0 * eps);
        for (std::size_t j = 0; j < p.inner_iters; ++j) {
            Image drift = model.evaluate(x, sigma);
            if (p.lambda > 0.0) drift = drift + measurement_drift(x, y, op, p.lambda, sigma);
            const Image z = gaussian_field(x.rows, x.cols, rng);
            for (std::size_t k = 0; k < x.size(); ++k)
                x.data[k] += eps * drift.data[k] + noise_scale * z.data[k];
            check_finite(x, i, j);
            stepped = true;
        }
        if (hook && i % 16 == 0) hook(i, x);
    }
    // One hard data-consistency mapping at the end; the in-loop drift is only
    // a soft pull, so kept frequencies are enforced exactly here.
    if (stepped) x = data_consistency(x, y, op, p.lambda);
    return x;
}

Image pc_sample(const ScoreModel& model, const ComplexField& y, const MeasurementOp& op,
                const PcParams& p, const SigmaSchedule& schedule, RngState& rng,
                const ProgressHook& hook) {
    if (schedule.size() != p.n)
        throw std::invalid_argument("pc_sample: schedule length does not match n");
    if (p.lambda < 0.0 || p.lambda > 1.0)
        throw std::invalid_argument("pc_sample: lambda must be in [0,1]");
    const std::size_t R = model.rows(), C = model.cols();
    Image x = gaussian_field(R, C, rng);
    for (double& v : x.data) v *= schedule.max();
    for (std::size_t i = p.n - 1; i-- > 0;) {
        const double s_hi = schedule.sigma(i + 1);
        const double s_lo = schedule.sigma(i);
        const double dv = s_hi * s_hi - s_lo * s_lo;
        // Predictor: reverse-diffusion Euler step at the higher noise level.
        {
            const Image s = model.evaluate(x, s_hi);
            const Image z = gaussian_field(R, C, rng);
            const double ns = std::sqrt(dv);
            for (std::size_t k = 0; k < x.size(); ++k)
                x.data[k] += dv * s.data[k] + ns * z.data[k];
            check_finite(x, i, 0);
        }
        x = data_consistency(x, y, op, p.lambda);
        // Corrector: one Langevin step at the lower noise level, step size
        // set from the snr rule eps = 2 (r ||z|| / ||s||)^2.
        {
            const Image s = model.evaluate(x, s_lo);
            const Image z = gaussian_field(R, C, rng);
            const double sn = norm2(s);
            const double eps = sn > 0.0 ? 2.0 * std::pow(p.snr * norm2(z) / sn, 2.0) : 0.0;
            const double ns = std::sqrt(2.0 * eps);
            for (std::size_t k = 0; k < x.size(); ++k)
                x.data[k] += eps * s.data[k] + ns * z.data[k];
            check_finite(x, i, 1);
        }
        x = data_consistency(x, y, op, p.lambda);
        if (hook && i % 16 == 0) hook(i, x);
    }
    return x;
}

std::vector<Image> lambda_sweep(const ScoreModel& model, const ComplexField& y,
                                const MeasurementOp& op, const std::vector<double>& lambdas,
                                const PcParams& base, const SigmaSchedule& schedule,
                                const RngState& rng) {
    std::vector<Image> out;
    out.reserve(lambdas.size());
    for (double lam : lambdas) {
        PcParams p = base;
        p.lambda = lam;
        RngState local = rng; // identical noise for every lambda
        out.push_back(pc_sample(model, y, op, p, schedule, local));
    }
    return out;
}

} // namespace sr
