#ifndef SR_VARIATIONAL_HPP
#define SR_VARIATIONAL_HPP

#include <vector>

#include "sr/image.hpp"
#include "sr/operators.hpp"

namespace sr {

struct TvParams {
    double epsilon = 1e-3; // Charbonnier smoothing
    double lambda = 1.0;   // data-fidelity weight, >= 0
    std::size_t max_iters = 2000;
    double tol = 1e-8;     // relative objective change
};

/// Charbonnier-smoothed total variation
///   sum_{i,j} sqrt((grad_h x)^2 + (grad_v x)^2 + eps^2).
double tv_value(const Image& x, double epsilon);

/// Analytic gradient of tv_value.
Image tv_gradient(const Image& x, double epsilon);

struct TvTracePoint {
    std::size_t iter;
    double objective;
    double data_fidelity; // 0.5*||Ax - y||^2
    double tv;
};

struct TvResult {
    Image x;
    bool converged = false;
    std::vector<TvTracePoint> trace;
};

/// Minimize (lambda/2)||A x - y||^2 + TV_eps(x) with restarted FISTA:
/// backtracking line search, real-part projection every iteration, and
/// momentum restart whenever the objective increases.
TvResult reconstruct_tv(const ComplexField& y, const MeasurementOp& op, const TvParams& p,
                        std::size_t rows, std::size_t cols);

void save_tv_trace(const std::vector<TvTracePoint>& trace, const std::string& path);

} // namespace sr

#endif
