#include "sr/variational.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sr {

double tv_value(const Image& x, double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("tv_value: epsilon must be nonnegative");
    const Image gh = fd_h(x);
    const Image gv = fd_v(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += std::sqrt(gh.data[i] * gh.data[i] + gv.data[i] * gv.data[i] + epsilon * epsilon);
    return acc;
}

Image tv_gradient(const Image& x, double epsilon) {
    const Image gh = fd_h(x);
    const Image gv = fd_v(x);
    Image nh(x.rows, x.cols), nv(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = std::sqrt(gh.data[i] * gh.data[i] + gv.data[i] * gv.data[i] +
                                   epsilon * epsilon);
        nh.data[i] = gh.data[i] / d;
        nv.data[i] = gv.data[i] / d;
    }
    return fd_h_adjoint(nh) + fd_v_adjoint(nv);
}

namespace {

double fidelity(const ComplexField& r) {
    double acc = 0.0;
    for (const auto& v : r.data) acc += std::norm(v);
    return 0.5 * acc;
}

// True adjoint of the forward model (not the FBP pseudo-inverse used for
// data consistency): required for a descent direction on ||Ax - y||^2.
Image true_adjoint(const MeasurementOp& op, const ComplexField& r, std::size_t rows,
                   std::size_t cols) {
    if (op.kind == Modality::MRI) return op.adjoint(r).real_part();
    (void)cols;
    return backproject(r.real_part(), op.angles, rows);
}

} // namespace

TvResult reconstruct_tv(const ComplexField& y, const MeasurementOp& op, const TvParams& p,
                        std::size_t rows, std::size_t cols) {
    if (p.lambda < 0.0) throw std::invalid_argument("reconstruct_tv: lambda must be >= 0");
    if (p.epsilon <= 0.0) throw std::invalid_argument("reconstruct_tv: epsilon must be positive");

    auto objective = [&](const Image& x, double& fid, double& tv) {
        tv = tv_value(x, p.epsilon);
        fid = 0.0;
        if (p.lambda > 0.0) {
            ComplexField r = op.forward(x);
            for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= y.data[i];
            fid = fidelity(r);
        }
        return p.lambda * fid + tv;
    };
    auto gradient = [&](const Image& x) {
        Image g = tv_gradient(x, p.epsilon);
        if (p.lambda > 0.0) {
            ComplexField r = op.forward(x);
            for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= y.data[i];
            const Image ga = true_adjoint(op, r, rows, cols);
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += p.lambda * ga.data[i];
        }
        return g;
    };

    Image x = p.lambda > 0.0 ? true_adjoint(op, y, rows, cols) : Image(rows, cols);
    Image xv = x; // momentum point
    double t = 1.0;
    const double an = p.lambda > 0.0 ? op.op_norm() : 0.0;
    double L = p.lambda * an * an + 8.0 / p.epsilon;

    TvResult res;
    double fid, tv;
    double f_prev = objective(x, fid, tv);
    res.trace.push_back({0, f_prev, fid, tv});
    Image x_best = x;
    double f_best = f_prev;

    for (std::size_t it = 1; it <= p.max_iters; ++it) {
        const Image g = gradient(xv);
        double fv_fid, fv_tv;
        const double fv = objective(xv, fv_fid, fv_tv);
        Image x_new;
        double f_new;
        // Backtracking on the proximal-gradient majorizer.
        for (int bt = 0;; ++bt) {
            x_new = xv;
            for (std::size_t i = 0; i < x_new.size(); ++i) x_new.data[i] -= g.data[i] / L;
            f_new = objective(x_new, fid, tv);
            double lin = fv, step2 = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double d = x_new.data[i] - xv.data[i];
                lin += g.data[i] * d;
                step2 += d * d;
            }
            if (f_new <= lin + 0.5 * L * step2 + 1e-12 || bt >= 60) break;
            L *= 2.0;
        }
        if (f_new > f_prev + 1e-12) {
            // Function-value restart: drop momentum and retry from x.
            t = 1.0;
            xv = x;
            const Image gr = gradient(xv);
            x_new = xv;
            for (std::size_t i = 0; i < x_new.size(); ++i) x_new.data[i] -= gr.data[i] / L;
            f_new = objective(x_new, fid, tv);
        }
        const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        xv = x_new;
        const double beta = (t - 1.0) / t_new;
        for (std::size_t i = 0; i < xv.size(); ++i)
            xv.data[i] += beta * (x_new.data[i] - x.data[i]);
        t = t_new;
        x = x_new;
        res.trace.push_back({it, f_new, fid, tv});
        if (f_new < f_best) {
            f_best = f_new;
            x_best = x;
        }
        if (std::abs(f_prev - f_new) <= p.tol * std::max(1.0, std::abs(f_prev))) {
            res.converged = true;
            f_prev = f_new;
            break;
        }
        f_prev = f_new;
    }
    res.x = res.converged ? x : x_best;
    return res;
}

void save_tv_trace(const std::vector<TvTracePoint>& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_tv_trace: cannot open " + path);
    f << "iter,objective,data_fidelity,tv\n";
    f.precision(12);
    for (const auto& tp : trace)
        f << tp.iter << "," << tp.objective << "," << tp.data_fidelity << "," << tp.tv << "\n";
    if (!f) throw std::runtime_error("save_tv_trace: write failed for " + path);
}

} // namespace sr
