// Command-line front end for the reconstruction pipeline.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sr/analysis.hpp"
#include "sr/diffusion.hpp"
#include "sr/harness.hpp"
#include "sr/operators.hpp"
#include "sr/pngio.hpp"
#include "sr/samplers.hpp"
#include "sr/scorenet.hpp"
#include "sr/variational.hpp"

namespace fs = std::filesystem;
using namespace sr;

namespace {

std::vector<Image> load_normalized(const std::string& dir) {
    std::vector<Image> out;
    for (const auto& f : list_slices(dir)) {
        Image x = load_image(f);
        double mx = 0.0;
        for (double v : x.data) mx = std::max(mx, v);
        if (mx > 0.0)
            for (double& v : x.data) v /= mx;
        out.push_back(std::move(x));
    }
    if (out.empty()) throw std::runtime_error("no slices found in " + dir);
    return out;
}

int cmd_train(CLI::App& app) {
    struct Args {
        std::string dataset, output;
        std::uint64_t seed = 0;
        TrainConfig tc;
        NetConfig nc;
        std::size_t n = 500;
        double sigma_min = 0.01, sigma_max = 378.0;
    };
    auto a = std::make_shared<Args>();
    a->nc.base_channels = 8;
    a->nc.deep_channels = 16;
    a->nc.blocks_per_stage = 1;
    auto* c = app.add_subcommand("train", "Train a score network on a slice directory");
    c->add_option("--dataset", a->dataset, "directory of raw slices")->required();
    c->add_option("--output", a->output, "output directory")->required();
    c->add_option("--seed", a->seed, "RNG seed")->required();
    c->add_option("--iterations", a->tc.iterations, "training iterations");
    c->add_option("--batch", a->tc.batch, "batch size");
    c->add_option("--lr", a->tc.lr_peak, "peak learning rate");
    c->add_option("--warmup", a->tc.warmup_iters, "linear warmup iterations");
    c->add_option("--depth", a->nc.depth, "network depth d (1..4)");
    c->add_option("--base-channels", a->nc.base_channels, "channels at full resolution");
    c->add_option("--deep-channels", a->nc.deep_channels, "channels at coarser resolutions");
    c->add_option("--blocks", a->nc.blocks_per_stage, "residual blocks per stage");
    c->add_flag("--group-norm", a->nc.group_norm, "enable group normalization");
    c->add_option("--n", a->n, "schedule length");
    c->add_option("--sigma-min", a->sigma_min, "schedule minimum");
    c->add_option("--sigma-max", a->sigma_max, "schedule maximum");
    c->callback([a]() {
        const auto ds = load_normalized(a->dataset);
        RngState rng(a->seed);
        ScoreNet net(a->nc, ds[0].rows, ds[0].cols, rng);
        const auto schedule = make_schedule(a->n, a->sigma_min, a->sigma_max);
        const TrainResult tr = train(net, ds, a->tc, schedule, rng);
        fs::create_directories(a->output);
        save_checkpoint(net, tr.ema_params, a->output + "/checkpoint.ckpt");
        save_loss_trace(tr.loss_trace, a->output + "/loss_trace.csv");
        std::printf("trained %zu iterations, %zu parameters -> %s\n", a->tc.iterations,
                    net.param_count(), (a->output + "/checkpoint.ckpt").c_str());
    });
    return 0;
}

int cmd_sample(CLI::App& app) {
    struct Args {
        std::string model, output;
        std::uint64_t seed = 0;
        std::size_t count = 1, n = 250, size = 64;
        double sigma_min = 0.01, sigma_max = 378.0, snr = 0.16;
    };
    auto a = std::make_shared<Args>();
    auto* c = app.add_subcommand("sample", "Draw unconditional samples from a score model");
    c->add_option("--model", a->model, "checkpoint:<path> or gaussian:mu=..,var=..")->required();
    c->add_option("--output", a->output, "output directory")->required();
    c->add_option("--seed", a->seed, "RNG seed")->required();
    c->add_option("--count", a->count, "number of samples");
    c->add_option("--size", a->size, "image side (gaussian model only)");
    c->add_option("--n", a->n, "schedule length");
    c->add_option("--sigma-min", a->sigma_min, "schedule minimum");
    c->add_option("--sigma-max", a->sigma_max, "schedule maximum");
    c->add_option("--snr", a->snr, "corrector signal-to-noise ratio");
    c->callback([a]() {
        std::unique_ptr<ScoreModel> m;
        if (a->model.rfind("checkpoint:", 0) == 0) {
            m = load_checkpoint(a->model.substr(11)).instantiate(true);
        } else if (a->model.rfind("gaussian:", 0) == 0) {
            double mu = 0.0, var = 1.0;
            std::istringstream in(a->model.substr(9));
            std::string item;
            while (std::getline(in, item, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) throw CLI::ValidationError("bad gaussian model spec");
                const std::string k = item.substr(0, eq);
                if (k == "mu") mu = std::stod(item.substr(eq + 1));
                else if (k == "var") var = std::stod(item.substr(eq + 1));
                else throw CLI::ValidationError("bad gaussian model key: " + k);
            }
            m = std::make_unique<GaussianScoreModel>(Image(a->size, a->size, mu),
                                                     Image(a->size, a->size, var));
        } else {
            throw CLI::ValidationError("model spec not understood: " + a->model);
        }
        const auto schedule = make_schedule(a->n, a->sigma_min, a->sigma_max);
        // lambda = 0: the measurement never enters, this is prior sampling.
        const MeasurementOp op = MeasurementOp::mri(mask_full(m->rows(), m->cols()));
        const ComplexField y(m->rows(), m->cols());
        fs::create_directories(a->output);
        for (std::size_t i = 0; i < a->count; ++i) {
            PcParams p;
            p.n = a->n;
            p.lambda = 0.0;
            p.snr = a->snr;
            RngState rng = RngState(a->seed).derive(i + 1);
            const Image x = pc_sample(*m, y, op, p, schedule, rng);
            char name[32];
            std::snprintf(name, sizeof name, "sample_%04zu", i);
            save_image(x, a->output + "/" + name + ".img");
            save_png(x, a->output + "/" + name + ".png");
        }
        std::printf("wrote %zu samples to %s\n", a->count, a->output.c_str());
    });
    return 0;
}

void apply_overrides(ExperimentConfig& cfg, bool seed_set, std::uint64_t seed, bool no_timings,
                     std::size_t workers) {
    if (seed_set) cfg.seed = seed;
    if (no_timings) cfg.with_timings = false;
    if (workers > 0) cfg.workers = workers;
}

int cmd_reconstruct(CLI::App& app) {
    auto config = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto no_timings = std::make_shared<bool>(false);
    auto workers = std::make_shared<std::size_t>(0);
    auto* c = app.add_subcommand("reconstruct", "Run a reconstruction experiment from a config file");
    c->add_option("--config", *config, "experiment config file")->required();
    auto* seed_opt = c->add_option("--seed", *seed, "RNG seed (overrides config)");
    c->add_flag("--no-timings", *no_timings, "omit timing column for byte-identical CSVs");
    c->add_option("--workers", *workers, "parallel slice workers (overrides config)");
    c->callback([=]() {
        ExperimentConfig cfg = ExperimentConfig::from_file(*config);
        apply_overrides(cfg, seed_opt->count() > 0, *seed, *no_timings, *workers);
        const ReconReport rep = run_experiment(cfg);
        std::printf("%s on %s: %zu/%zu slices, mean psnr %.2f dB, mean ssim %.4f\n",
                    rep.method.c_str(), rep.mask.c_str(), rep.succeeded(), rep.rows.size(),
                    rep.mean_psnr(), rep.mean_ssim());
    });
    return 0;
}

int cmd_tv(CLI::App& app) {
    auto cfg = std::make_shared<ExperimentConfig>();
    cfg->method = ReconMethod::Tv;
    cfg->lambda = 1000.0;
    auto no_timings = std::make_shared<bool>(false);
    auto* c = app.add_subcommand("tv", "Charbonnier-TV baseline reconstruction");
    c->add_option("--dataset", cfg->dataset_dir, "directory of raw slices")->required();
    c->add_option("--output", cfg->output_dir, "output directory")->required();
    c->add_option("--modality", cfg->modality, "mri or ct");
    c->add_option("--mask", cfg->mask_type, "mask type");
    c->add_option("--accel", cfg->accel, "acceleration factor");
    c->add_option("--center-frac", cfg->center_frac, "central fraction (gaussian1d)");
    c->add_option("--spokes", cfg->spokes, "radial mask spokes");
    c->add_option("--n-theta", cfg->n_theta, "CT view count");
    c->add_option("--lambda", cfg->lambda, "data-fidelity weight (>= 0)");
    c->add_option("--epsilon", cfg->tv_epsilon, "Charbonnier epsilon");
    c->add_option("--max-iters", cfg->tv_max_iters, "iteration cap");
    c->add_option("--tol", cfg->tv_tol, "relative objective tolerance");
    c->add_option("--seed", cfg->seed, "RNG seed (mask generation)")->required();
    c->add_flag("--no-timings", *no_timings, "omit timing column");
    c->callback([=]() {
        cfg->with_timings = !*no_timings;
        const ReconReport rep = run_experiment(*cfg);
        std::printf("tv on %s: %zu/%zu slices, mean psnr %.2f dB, mean ssim %.4f\n",
                    rep.mask.c_str(), rep.succeeded(), rep.rows.size(), rep.mean_psnr(),
                    rep.mean_ssim());
    });
    return 0;
}

int cmd_metrics(CLI::App& app) {
    auto recon = std::make_shared<std::string>();
    auto ref = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto* c = app.add_subcommand("metrics", "PSNR/SSIM between reconstructions and references");
    c->add_option("--recon", *recon, "reconstruction image or directory")->required();
    c->add_option("--ref", *ref, "reference image or directory")->required();
    c->add_option("--output", *output, "metrics CSV path (default: stdout)");
    c->callback([=]() {
        std::vector<std::pair<std::string, std::string>> pairs;
        if (fs::is_directory(*recon)) {
            const auto a = list_slices(*recon);
            const auto b = list_slices(*ref);
            if (a.size() != b.size())
                throw std::runtime_error("metrics: directories hold different slice counts");
            for (std::size_t i = 0; i < a.size(); ++i) pairs.emplace_back(a[i], b[i]);
        } else {
            pairs.emplace_back(*recon, *ref);
        }
        std::vector<MetricsRow> rows;
        for (const auto& [ra, rb] : pairs) {
            MetricsRow row;
            row.id = fs::path(ra).stem().string();
            row.mask = "";
            const Image x = load_image(ra);
            const Image r = load_image(rb);
            row.psnr = psnr(x, r);
            row.ssim = ssim(x, r);
            rows.push_back(row);
        }
        if (output->empty()) {
            for (const auto& r : rows)
                std::printf("%s psnr=%.4f ssim=%.6f\n", r.id.c_str(), r.psnr, r.ssim);
        } else {
            save_metrics_csv(rows, *output, /*with_timings=*/false);
        }
    });
    return 0;
}

int cmd_masks(CLI::App& app) {
    auto type = std::make_shared<std::string>("gaussian1d");
    auto rows = std::make_shared<std::size_t>(64);
    auto cols = std::make_shared<std::size_t>(64);
    auto accel = std::make_shared<double>(4.0);
    auto center = std::make_shared<double>(0.04);
    auto spokes = std::make_shared<std::size_t>(60);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto output = std::make_shared<std::string>();
    auto* c = app.add_subcommand("masks", "Generate a k-space undersampling mask");
    c->add_option("--type", *type, "gaussian1d|gaussian2d|radial|poisson|full");
    c->add_option("--rows", *rows, "mask rows");
    c->add_option("--cols", *cols, "mask cols");
    c->add_option("--accel", *accel, "acceleration factor");
    c->add_option("--center-frac", *center, "central fraction (gaussian1d)");
    c->add_option("--spokes", *spokes, "spokes (radial)");
    c->add_option("--seed", *seed, "RNG seed")->required();
    c->add_option("--output", *output, "output path (.img)")->required();
    c->callback([=]() {
        RngState rng(*seed);
        KMask m;
        if (*type == "gaussian1d") m = mask_gaussian1d(*rows, *cols, *accel, *center, rng);
        else if (*type == "gaussian2d") m = mask_gaussian2d(*rows, *cols, *accel, rng);
        else if (*type == "radial") m = mask_radial(*rows, *cols, *spokes);
        else if (*type == "poisson") m = mask_poisson_disk(*rows, *cols, *accel, rng);
        else if (*type == "full") m = mask_full(*rows, *cols);
        else throw CLI::ValidationError("unknown mask type: " + *type);
        save_mask(m, *output);
        Image preview(m.rows, m.cols);
        for (std::size_t i = 0; i < m.rows * m.cols; ++i) preview.data[i] = m.keep[i] ? 1.0 : 0.0;
        save_png(preview, *output + ".png");
        std::printf("%s mask %zux%zu: kept %zu/%zu (%.3f)\n", type->c_str(), m.rows, m.cols,
                    m.kept_count(), m.rows * m.cols, m.kept_fraction());
    });
    return 0;
}

int cmd_rf(CLI::App& app) {
    auto depth = std::make_shared<std::size_t>(0);
    auto blocks = std::make_shared<std::size_t>(4);
    auto* c = app.add_subcommand("rf", "Theoretical receptive field of the score network");
    c->add_option("--depth", *depth, "depth d (default: all of 1..4)");
    c->add_option("--blocks", *blocks, "residual blocks per stage");
    c->callback([=]() {
        const auto report = [&](std::size_t d) {
            NetConfig cfg;
            cfg.depth = d;
            cfg.blocks_per_stage = *blocks;
            cfg.attention = d == 4;
            std::printf("d=%zu  r0=%zu\n", d, receptive_field(net_layer_specs(cfg)));
        };
        if (*depth == 0)
            for (std::size_t d = 1; d <= 4; ++d) report(d);
        else
            report(*depth);
    });
    return 0;
}

int cmd_phantoms(CLI::App& app) {
    auto kind = std::make_shared<std::string>("shepp-logan");
    auto size = std::make_shared<std::size_t>(64);
    auto count = std::make_shared<std::size_t>(1);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto output = std::make_shared<std::string>();
    auto* c = app.add_subcommand("phantoms", "Write a synthetic slice dataset");
    c->add_option("--kind", *kind, "shepp-logan|piecewise-blobs|gaussian-draws");
    c->add_option("--size", *size, "image side");
    c->add_option("--count", *count, "number of slices");
    c->add_option("--seed", *seed, "RNG seed")->required();
    c->add_option("--output", *output, "output directory")->required();
    c->callback([=]() {
        RngState rng(*seed);
        const auto ds = make_phantoms(*kind, *size, *count, rng);
        write_phantoms(ds, *output);
        std::printf("wrote %zu %s slices to %s\n", ds.size(), kind->c_str(), output->c_str());
    });
    return 0;
}

int cmd_sweep_lambda(CLI::App& app) {
    auto config = std::make_shared<std::string>();
    auto lambdas = std::make_shared<std::vector<double>>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto* c = app.add_subcommand("sweep-lambda",
                                 "Posterior samples across data-consistency weights");
    c->add_option("--config", *config, "experiment config file")->required();
    c->add_option("--lambdas", *lambdas, "lambda values")->required()->expected(-1);
    c->add_option("--seed", *seed, "RNG seed (overrides config)")->required();
    c->callback([=]() {
        ExperimentConfig cfg = ExperimentConfig::from_file(*config);
        cfg.seed = *seed;
        const auto files = list_slices(cfg.dataset_dir);
        if (files.empty()) throw std::runtime_error("dataset is empty");
        Image xbar = load_image(files[0]);
        double mx = 0.0;
        for (double v : xbar.data) mx = std::max(mx, v);
        if (mx > 0.0)
            for (double& v : xbar.data) v /= mx;
        RngState mask_rng = RngState(cfg.seed).derive(0x6d61736bULL);
        KMask m;
        if (cfg.mask_type == "gaussian1d")
            m = mask_gaussian1d(xbar.rows, xbar.cols, cfg.accel, cfg.center_frac, mask_rng);
        else if (cfg.mask_type == "gaussian2d")
            m = mask_gaussian2d(xbar.rows, xbar.cols, cfg.accel, mask_rng);
        else if (cfg.mask_type == "radial")
            m = mask_radial(xbar.rows, xbar.cols, cfg.spokes);
        else if (cfg.mask_type == "poisson")
            m = mask_poisson_disk(xbar.rows, xbar.cols, cfg.accel, mask_rng);
        else
            m = mask_full(xbar.rows, xbar.cols);
        const MeasurementOp op = MeasurementOp::mri(std::move(m));
        const ComplexField y = op.forward(xbar);
        std::vector<Image> slices{xbar};
        std::unique_ptr<ScoreModel> model;
        if (cfg.model == "gaussian-empirical")
            throw std::runtime_error("sweep-lambda: gaussian-empirical needs >1 slice context; "
                                     "use an explicit gaussian: or checkpoint: model");
        if (cfg.model.rfind("checkpoint:", 0) == 0) {
            model = load_checkpoint(cfg.model.substr(11)).instantiate(true);
        } else {
            // reuse the gaussian:mu=..,var=.. syntax via a tiny local parse
            if (cfg.model.rfind("gaussian:", 0) != 0)
                throw std::runtime_error("sweep-lambda: model spec not understood");
            double mu = 0.0, var = 1.0;
            std::istringstream in(cfg.model.substr(9));
            std::string item;
            while (std::getline(in, item, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) throw std::runtime_error("bad gaussian model spec");
                if (item.substr(0, eq) == "mu") mu = std::stod(item.substr(eq + 1));
                else var = std::stod(item.substr(eq + 1));
            }
            model = std::make_unique<GaussianScoreModel>(Image(xbar.rows, xbar.cols, mu),
                                                         Image(xbar.rows, xbar.cols, var));
        }
        const auto schedule = make_schedule(cfg.n, cfg.sigma_min, cfg.sigma_max);
        PcParams base;
        base.n = cfg.n;
        base.snr = cfg.snr;
        const RngState rng = RngState(cfg.seed).derive(1);
        const auto images = lambda_sweep(*model, y, op, *lambdas, base, schedule, rng);
        fs::create_directories(cfg.output_dir);
        std::ofstream csv(cfg.output_dir + "/sweep.csv");
        csv << "lambda,fidelity,psnr\n";
        csv.precision(12);
        for (std::size_t i = 0; i < images.size(); ++i) {
            char name[48];
            std::snprintf(name, sizeof name, "sweep_%07.4f", (*lambdas)[i]);
            save_image(images[i], cfg.output_dir + "/" + std::string(name) + ".img");
            save_png(images[i], cfg.output_dir + "/" + std::string(name) + ".png");
            ComplexField r = op.forward(images[i]);
            double fid = 0.0;
            for (std::size_t k = 0; k < r.size(); ++k) fid += std::norm(r.data[k] - y.data[k]);
            csv << (*lambdas)[i] << "," << std::sqrt(fid) << "," << psnr(images[i], xbar) << "\n";
        }
        std::printf("wrote %zu sweep images to %s\n", images.size(), cfg.output_dir.c_str());
    });
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score-based medical image reconstruction toolbox"};
    app.require_subcommand(1);
    cmd_train(app);
    cmd_sample(app);
    cmd_reconstruct(app);
    cmd_tv(app);
    cmd_metrics(app);
    cmd_masks(app);
    cmd_rf(app);
    cmd_phantoms(app);
    cmd_sweep_lambda(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
