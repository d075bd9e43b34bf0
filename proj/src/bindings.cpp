#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <stdexcept>

#include "sr/analysis.hpp"
#include "sr/diffusion.hpp"
#include "sr/harness.hpp"
#include "sr/image.hpp"
#include "sr/operators.hpp"
#include "sr/rng.hpp"
#include "sr/samplers.hpp"
#include "sr/scoremodel.hpp"
#include "sr/scorenet.hpp"
#include "sr/variational.hpp"

namespace py = pybind11;
using namespace sr;

namespace {

Image to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Image x(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + x.size(), x.data.begin());
    return x;
}

py::array_t<double> from_image(const Image& x) {
    py::array_t<double> a({x.rows, x.cols});
    std::copy(x.data.begin(), x.data.end(), a.mutable_data());
    return a;
}

ComplexField to_field(const py::array_t<std::complex<double>,
                                        py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    ComplexField x(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + x.size(), x.data.begin());
    return x;
}

py::array_t<std::complex<double>> from_field(const ComplexField& x) {
    py::array_t<std::complex<double>> a({x.rows, x.cols});
    std::copy(x.data.begin(), x.data.end(), a.mutable_data());
    return a;
}

KMask to_mask(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D mask array");
    KMask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    for (std::size_t i = 0; i < m.keep.size(); ++i) m.keep[i] = a.data()[i] ? 1 : 0;
    return m;
}

py::array_t<std::uint8_t> from_mask(const KMask& m) {
    py::array_t<std::uint8_t> a({m.rows, m.cols});
    for (std::size_t i = 0; i < m.keep.size(); ++i) a.mutable_data()[i] = m.keep[i] ? 1 : 0;
    return a;
}

MeasurementOp op_from_args(const py::object& mask, const py::object& angles,
                           std::size_t detectors) {
    if (!mask.is_none())
        return MeasurementOp::mri(
            to_mask(mask.cast<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>()));
    if (!angles.is_none()) {
        AngleSet a;
        a.angles = angles.cast<std::vector<double>>();
        return MeasurementOp::ct(std::move(a), detectors);
    }
    throw std::invalid_argument("pass either mask= (MRI) or angles= (CT)");
}

SigmaSchedule schedule_from(const std::vector<double>& sigmas) {
    SigmaSchedule s;
    s.sigmas = sigmas;
    return s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Score-based medical image reconstruction core";

    // -- score models ---------------------------------------------------------
    py::class_<ScoreModel, std::shared_ptr<ScoreModel>>(m, "ScoreModel")
        .def("evaluate",
             [](const ScoreModel& s, const py::array_t<double, py::array::c_style |
                                                                   py::array::forcecast>& x,
                double sigma) { return from_image(s.evaluate(to_image(x), sigma)); },
             py::arg("x"), py::arg("sigma"))
        .def_property_readonly("rows", &ScoreModel::rows)
        .def_property_readonly("cols", &ScoreModel::cols);

    m.def(
        "gaussian_score_model",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mu,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& var) {
            return std::shared_ptr<ScoreModel>(
                std::make_shared<GaussianScoreModel>(to_image(mu), to_image(var)));
        },
        py::arg("mu"), py::arg("var"),
        "Analytic score of a diagonal Gaussian prior N(mu, diag(var)).");

    m.def(
        "load_checkpoint_model",
        [](const std::string& path, bool use_ema) {
            return std::shared_ptr<ScoreModel>(load_checkpoint(path).instantiate(use_ema));
        },
        py::arg("path"), py::arg("use_ema") = true,
        "Score network restored from a training checkpoint.");

    // -- schedule -------------------------------------------------------------
    m.def(
        "make_schedule",
        [](std::size_t n, double sigma_min, double sigma_max) {
            return make_schedule(n, sigma_min, sigma_max).sigmas;
        },
        py::arg("n"), py::arg("sigma_min"), py::arg("sigma_max"),
        "Geometric noise ladder of the variance-exploding SDE.");

    // -- operators ------------------------------------------------------------
    m.def("dft2", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return from_field(dft2(to_image(x)));
    });
    m.def("mri_forward",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask) {
              return from_field(mri_forward(to_image(x), to_mask(mask)));
          },
          py::arg("x"), py::arg("mask"));
    m.def("mri_adjoint",
          [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& y,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask) {
              return from_field(mri_adjoint(to_field(y), to_mask(mask)));
          },
          py::arg("y"), py::arg("mask"));
    m.def("radon",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const std::vector<double>& angles, std::size_t detectors) {
              AngleSet a;
              a.angles = angles;
              return from_image(radon(to_image(x), a, detectors));
          },
          py::arg("x"), py::arg("angles"), py::arg("detectors"));
    m.def("fbp",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& sino,
             const std::vector<double>& angles, std::size_t size) {
              AngleSet a;
              a.angles = angles;
              return from_image(fbp(to_image(sino), a, size));
          },
          py::arg("sinogram"), py::arg("angles"), py::arg("size"));
    m.def("sparse_view_angles",
          [](std::size_t n) { return sparse_view_angles(n).angles; }, py::arg("n_theta"));

    // -- masks ----------------------------------------------------------------
    m.def("mask_gaussian1d",
          [](std::size_t rows, std::size_t cols, double accel, double center_frac,
             std::uint64_t seed) {
              RngState rng(seed);
              return from_mask(mask_gaussian1d(rows, cols, accel, center_frac, rng));
          },
          py::arg("rows"), py::arg("cols"), py::arg("accel"), py::arg("center_frac"),
          py::arg("seed"));
    m.def("mask_gaussian2d",
          [](std::size_t rows, std::size_t cols, double accel, std::uint64_t seed) {
              RngState rng(seed);
              return from_mask(mask_gaussian2d(rows, cols, accel, rng));
          },
          py::arg("rows"), py::arg("cols"), py::arg("accel"), py::arg("seed"));
    m.def("mask_radial",
          [](std::size_t rows, std::size_t cols, std::size_t spokes) {
              return from_mask(mask_radial(rows, cols, spokes));
          },
          py::arg("rows"), py::arg("cols"), py::arg("spokes"));
    m.def("mask_poisson_disk",
          [](std::size_t rows, std::size_t cols, double accel, std::uint64_t seed) {
              RngState rng(seed);
              return from_mask(mask_poisson_disk(rows, cols, accel, rng));
          },
          py::arg("rows"), py::arg("cols"), py::arg("accel"), py::arg("seed"));

    // -- sampling and reconstruction -----------------------------------------
    m.def(
        "data_consistency",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& y,
           const py::object& mask, const py::object& angles, std::size_t detectors,
           double lam) {
            const MeasurementOp op = op_from_args(mask, angles, detectors);
            return from_image(data_consistency(to_image(x), to_field(y), op, lam));
        },
        py::arg("x"), py::arg("y"), py::arg("mask") = py::none(), py::arg("angles") = py::none(),
        py::arg("detectors") = 0, py::arg("lam") = 1.0);

    m.def(
        "pc_sample",
        [](const std::shared_ptr<ScoreModel>& model,
           const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& y,
           const py::object& mask, const py::object& angles, std::size_t detectors,
           const std::vector<double>& sigmas, double lam, double snr, std::uint64_t seed) {
            const MeasurementOp op = op_from_args(mask, angles, detectors);
            PcParams p;
            p.n = sigmas.size();
            p.lambda = lam;
            p.snr = snr;
            RngState rng(seed);
            return from_image(pc_sample(*model, to_field(y), op, p, schedule_from(sigmas), rng));
        },
        py::arg("model"), py::arg("y"), py::arg("mask") = py::none(),
        py::arg("angles") = py::none(), py::arg("detectors") = 0, py::arg("sigmas"),
        py::arg("lam") = 1.0, py::arg("snr") = 0.16, py::arg("seed") = 0);

    m.def(
        "ald_sample",
        [](const std::shared_ptr<ScoreModel>& model,
           const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& y,
           const py::object& mask, const py::object& angles, std::size_t detectors,
           const std::vector<double>& sigmas, std::size_t n_start, std::size_t inner_iters,
           double lam, double eps0, std::uint64_t seed) {
            const MeasurementOp op = op_from_args(mask, angles, detectors);
            AldParams p;
            p.n = sigmas.size();
            p.n_start = n_start;
            p.inner_iters = inner_iters;
            p.lambda = lam;
            p.eps0 = eps0;
            RngState rng(seed);
            return from_image(ald_sample(*model, to_field(y), op, p, schedule_from(sigmas), rng));
        },
        py::arg("model"), py::arg("y"), py::arg("mask") = py::none(),
        py::arg("angles") = py::none(), py::arg("detectors") = 0, py::arg("sigmas"),
        py::arg("n_start") = 230, py::arg("inner_iters") = 3, py::arg("lam") = 1.0,
        py::arg("eps0") = 2e-5, py::arg("seed") = 0);

    m.def(
        "reconstruct_tv",
        [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& y,
           const py::object& mask, const py::object& angles, std::size_t detectors,
           std::size_t rows, std::size_t cols, double lam, double epsilon,
           std::size_t max_iters, double tol) {
            const MeasurementOp op = op_from_args(mask, angles, detectors);
            TvParams p;
            p.lambda = lam;
            p.epsilon = epsilon;
            p.max_iters = max_iters;
            p.tol = tol;
            const TvResult r = reconstruct_tv(to_field(y), op, p, rows, cols);
            return py::make_tuple(from_image(r.x), r.converged);
        },
        py::arg("y"), py::arg("mask") = py::none(), py::arg("angles") = py::none(),
        py::arg("detectors") = 0, py::arg("rows"), py::arg("cols"), py::arg("lam") = 1000.0,
        py::arg("epsilon") = 1e-3, py::arg("max_iters") = 2000, py::arg("tol") = 1e-8);

    // -- metrics and data -----------------------------------------------------
    m.def("psnr",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& ref) {
              return psnr(to_image(x), to_image(ref));
          },
          py::arg("x"), py::arg("ref"));
    m.def("ssim",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& ref) {
              return ssim(to_image(x), to_image(ref));
          },
          py::arg("x"), py::arg("ref"));
    m.def("make_phantoms",
          [](const std::string& kind, std::size_t size, std::size_t count, std::uint64_t seed) {
              RngState rng(seed);
              py::list out;
              for (const Image& x : make_phantoms(kind, size, count, rng))
                  out.append(from_image(x));
              return out;
          },
          py::arg("kind"), py::arg("size"), py::arg("count"), py::arg("seed"));
    m.def("load_image_file",
          [](const std::string& path) { return from_image(load_image(path)); }, py::arg("path"));
    m.def("save_image_file",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const std::string& path) { save_image(to_image(x), path); },
          py::arg("x"), py::arg("path"));
    m.def("receptive_field_of_depth", [](std::size_t depth, std::size_t blocks) {
        NetConfig cfg;
        cfg.depth = depth;
        cfg.blocks_per_stage = blocks;
        cfg.attention = depth == 4;
        return receptive_field(net_layer_specs(cfg));
    }, py::arg("depth"), py::arg("blocks") = 4);
}
