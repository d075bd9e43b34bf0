#include "sr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sr/diffusion.hpp"
#include "sr/operators.hpp"
#include "sr/pngio.hpp"
#include "sr/samplers.hpp"
#include "sr/scoremodel.hpp"
#include "sr/variational.hpp"

namespace sr {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        kv[key] = val;
    }
    return kv;
}

std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

namespace {

// Accessor over the parsed map; section prefixes are ignored so both
// "sampler.lambda" and "lambda" address the same field.
struct KvReader {
    std::map<std::string, std::string> flat;
    mutable std::map<std::string, bool> used;

    explicit KvReader(const std::map<std::string, std::string>& kv) {
        for (const auto& [k, v] : kv) {
            const auto dot = k.rfind('.');
            const std::string base = dot == std::string::npos ? k : k.substr(dot + 1);
            if (!flat.emplace(base, v).second)
                throw std::runtime_error("config: duplicate key '" + base + "'");
            used[base] = false;
        }
    }
    std::optional<std::string> get(const std::string& k) const {
        const auto it = flat.find(k);
        if (it == flat.end()) return std::nullopt;
        used[k] = true;
        return it->second;
    }
    void check_all_used() const {
        for (const auto& [k, u] : used)
            if (!u) throw std::runtime_error("config: unknown key '" + k + "'");
    }
};

double to_real(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad number for '" + key + "': " + s);
    }
}

std::uint64_t to_count(const std::string& s, const std::string& key) {
    const double v = to_real(s, key);
    if (v < 0 || v != std::floor(v))
        throw std::runtime_error("config: '" + key + "' must be a nonnegative integer");
    return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::runtime_error("config: '" + key + "' must be true/false");
}

} // namespace

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
    KvReader r(kv);
    ExperimentConfig c;
    if (auto v = r.get("modality")) c.modality = *v;
    if (c.modality != "mri" && c.modality != "ct")
        throw std::runtime_error("config: modality must be mri or ct");
    if (auto v = r.get("mask")) c.mask_type = *v;
    if (auto v = r.get("accel")) c.accel = to_real(*v, "accel");
    if (auto v = r.get("center_frac")) c.center_frac = to_real(*v, "center_frac");
    if (auto v = r.get("spokes")) c.spokes = to_count(*v, "spokes");
    if (auto v = r.get("n_theta")) c.n_theta = to_count(*v, "n_theta");
    if (auto v = r.get("method")) {
        if (*v == "zero-filled") c.method = ReconMethod::ZeroFilled;
        else if (*v == "ald") c.method = ReconMethod::Ald;
        else if (*v == "pc") c.method = ReconMethod::Pc;
        else if (*v == "tv") c.method = ReconMethod::Tv;
        else throw std::runtime_error("config: method must be zero-filled|ald|pc|tv");
    }
    if (c.method == ReconMethod::Ald) c.n = 500; // overridable below
    if (auto v = r.get("model")) c.model = *v;
    if (auto v = r.get("lambda")) c.lambda = to_real(*v, "lambda");
    if (auto v = r.get("n")) c.n = to_count(*v, "n");
    if (auto v = r.get("sigma_min")) c.sigma_min = to_real(*v, "sigma_min");
    if (auto v = r.get("sigma_max")) c.sigma_max = to_real(*v, "sigma_max");
    if (auto v = r.get("n_start")) c.n_start = to_count(*v, "n_start");
    if (auto v = r.get("inner_iters")) c.inner_iters = to_count(*v, "inner_iters");
    if (auto v = r.get("eps0")) c.eps0 = to_real(*v, "eps0");
    if (auto v = r.get("snr")) c.snr = to_real(*v, "snr");
    if (auto v = r.get("tv_epsilon")) c.tv_epsilon = to_real(*v, "tv_epsilon");
    if (auto v = r.get("tv_max_iters")) c.tv_max_iters = to_count(*v, "tv_max_iters");
    if (auto v = r.get("tv_tol")) c.tv_tol = to_real(*v, "tv_tol");
    if (auto v = r.get("seed")) c.seed = to_count(*v, "seed");
    if (auto v = r.get("dataset")) c.dataset_dir = *v;
    if (auto v = r.get("output")) c.output_dir = *v;
    if (auto v = r.get("workers")) c.workers = std::max<std::uint64_t>(1, to_count(*v, "workers"));
    if (auto v = r.get("write_png")) c.write_png = to_bool(*v, "write_png");
    if (auto v = r.get("timings")) c.with_timings = to_bool(*v, "timings");
    r.check_all_used();
    if (c.lambda < 0.0) throw std::runtime_error("config: lambda must be nonnegative");
    if (c.method != ReconMethod::Tv && c.lambda > 1.0)
        throw std::runtime_error("config: lambda must be in [0,1] for sampling methods");
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_map(load_config(path));
}

std::string ExperimentConfig::echo() const {
    std::ostringstream s;
    s.precision(17);
    s << "# experiment configuration echo\n"
      << "# slices are normalized to [0,1] by their per-slice maximum before\n"
      << "# the measurement y = A(x) is simulated (noise-free)\n"
      << "modality = " << modality << "\n"
      << "mask = " << mask_type << "\n"
      << "accel = " << accel << "\n"
      << "center_frac = " << center_frac << "\n"
      << "spokes = " << spokes << "\n"
      << "n_theta = " << n_theta << "\n"
      << "method = "
      << (method == ReconMethod::ZeroFilled ? "zero-filled"
          : method == ReconMethod::Ald      ? "ald"
          : method == ReconMethod::Pc       ? "pc"
                                            : "tv")
      << "\n"
      << "model = " << model << "\n"
      << "lambda = " << lambda << "\n"
      << "n = " << n << "\n"
      << "sigma_min = " << sigma_min << "\n"
      << "sigma_max = " << sigma_max << "\n"
      << "n_start = " << n_start << "\n"
      << "inner_iters = " << inner_iters << "\n"
      << "eps0 = " << eps0 << "\n"
      << "snr = " << snr << "\n"
      << "tv_epsilon = " << tv_epsilon << "\n"
      << "tv_max_iters = " << tv_max_iters << "\n"
      << "tv_tol = " << tv_tol << "\n"
      << "seed = " << seed << "\n"
      << "dataset = " << dataset_dir << "\n"
      << "output = " << output_dir << "\n"
      << "workers = " << workers << "\n"
      << "write_png = " << (write_png ? "true" : "false") << "\n"
      << "timings = " << (with_timings ? "true" : "false") << "\n";
    return s.str();
}

std::size_t ReconReport::succeeded() const {
    std::size_t n = 0;
    for (const auto& r : rows)
        if (!r.failed) ++n;
    return n;
}

namespace {

template <typename F>
double row_mean(const std::vector<MetricsRow>& rows, F field) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (!r.failed) {
            acc += field(r);
            ++n;
        }
    return n > 0 ? acc / static_cast<double>(n) : std::nan("");
}

template <typename F>
double row_std(const std::vector<MetricsRow>& rows, F field) {
    const double m = row_mean(rows, field);
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (!r.failed) {
            const double d = field(r) - m;
            acc += d * d;
            ++n;
        }
    return n > 0 ? std::sqrt(acc / static_cast<double>(n)) : std::nan("");
}

} // namespace

double ReconReport::mean_psnr() const { return row_mean(rows, [](const MetricsRow& r) { return r.psnr; }); }
double ReconReport::std_psnr() const { return row_std(rows, [](const MetricsRow& r) { return r.psnr; }); }
double ReconReport::mean_ssim() const { return row_mean(rows, [](const MetricsRow& r) { return r.ssim; }); }
double ReconReport::std_ssim() const { return row_std(rows, [](const MetricsRow& r) { return r.ssim; }); }
double ReconReport::mean_time() const { return row_mean(rows, [](const MetricsRow& r) { return r.time_s; }); }

std::vector<std::string> list_slices(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".img") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Model factory from the config's model spec string.
std::unique_ptr<ScoreModel> build_model(const std::string& spec, std::size_t rows, std::size_t cols,
                                        const std::vector<Image>& dataset) {
    if (spec.rfind("checkpoint:", 0) == 0)
        return load_checkpoint(spec.substr(11)).instantiate(true);
    if (spec.rfind("gaussian:", 0) == 0) {
        double mu = 0.0, var = 1.0;
        std::istringstream in(spec.substr(9));
        std::string item;
        while (std::getline(in, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("model spec: expected gaussian:mu=..,var=..");
            const std::string k = trim(item.substr(0, eq)), v = trim(item.substr(eq + 1));
            if (k == "mu") mu = std::stod(v);
            else if (k == "var") var = std::stod(v);
            else throw std::runtime_error("model spec: unknown gaussian parameter '" + k + "'");
        }
        if (var <= 0.0) throw std::runtime_error("model spec: var must be positive");
        return std::make_unique<GaussianScoreModel>(Image(rows, cols, mu), Image(rows, cols, var));
    }
    if (spec == "gaussian-empirical") {
        if (dataset.empty()) throw std::runtime_error("model spec: gaussian-empirical needs data");
        const Image mu = mean_image(dataset);
        Image var(rows, cols, 0.0);
        for (const Image& x : dataset)
            for (std::size_t i = 0; i < var.size(); ++i) {
                const double d = x.data[i] - mu.data[i];
                var.data[i] += d * d;
            }
        for (double& v : var.data)
            v = std::max(v / static_cast<double>(dataset.size()), 1e-4);
        return std::make_unique<GaussianScoreModel>(mu, var);
    }
    throw std::runtime_error("model spec not understood: '" + spec + "'");
}

MeasurementOp build_op(const ExperimentConfig& cfg, std::size_t rows, std::size_t cols,
                       RngState mask_rng) {
    if (cfg.modality == "ct") {
        if (rows != cols) throw std::runtime_error("CT requires square slices");
        return MeasurementOp::ct(sparse_view_angles(cfg.n_theta), rows);
    }
    KMask m;
    if (cfg.mask_type == "gaussian1d")
        m = mask_gaussian1d(rows, cols, cfg.accel, cfg.center_frac, mask_rng);
    else if (cfg.mask_type == "gaussian2d")
        m = mask_gaussian2d(rows, cols, cfg.accel, mask_rng);
    else if (cfg.mask_type == "radial")
        m = mask_radial(rows, cols, cfg.spokes);
    else if (cfg.mask_type == "poisson")
        m = mask_poisson_disk(rows, cols, cfg.accel, mask_rng);
    else if (cfg.mask_type == "full")
        m = mask_full(rows, cols);
    else
        throw std::runtime_error("unknown mask type: " + cfg.mask_type);
    return MeasurementOp::mri(std::move(m));
}

std::string slice_id(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

} // namespace

ReconReport run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto files = list_slices(cfg.dataset_dir);
    if (files.empty()) throw std::runtime_error("dataset is empty: " + cfg.dataset_dir);
    if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);

    // Load and normalize all slices up front (also feeds the empirical oracle).
    std::vector<Image> slices;
    std::vector<std::string> ids;
    for (const auto& f : files) {
        try {
            Image x = load_image(f);
            double mx = 0.0;
            for (double v : x.data) mx = std::max(mx, v);
            if (mx > 0.0)
                for (double& v : x.data) v /= mx;
            slices.push_back(std::move(x));
            ids.push_back(slice_id(f));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: skipping unreadable slice %s (%s)\n", f.c_str(),
                         e.what());
        }
    }
    if (slices.empty()) throw std::runtime_error("no readable slices in " + cfg.dataset_dir);
    const std::size_t rows = slices[0].rows, cols = slices[0].cols;
    for (const Image& x : slices)
        if (x.rows != rows || x.cols != cols)
            throw std::runtime_error("dataset slices disagree in size");

    const MeasurementOp op = build_op(cfg, rows, cols, RngState(cfg.seed).derive(0x6d61736bULL));
    std::unique_ptr<ScoreModel> model;
    if (cfg.method == ReconMethod::Ald || cfg.method == ReconMethod::Pc)
        model = build_model(cfg.model, rows, cols, slices);
    const SigmaSchedule schedule = make_schedule(cfg.n, cfg.sigma_min, cfg.sigma_max);

    ReconReport report;
    report.dataset = cfg.dataset_dir;
    report.mask = cfg.modality == "ct" ? "sparse-view" : cfg.mask_type;
    report.method = cfg.method == ReconMethod::ZeroFilled ? "zero-filled"
                    : cfg.method == ReconMethod::Ald      ? "ald"
                    : cfg.method == ReconMethod::Pc       ? "pc"
                                                          : "tv";
    report.model_desc = cfg.model;
    report.rows.resize(slices.size());

    auto process = [&](std::size_t idx) {
        const Image& xbar = slices[idx];
        MetricsRow row;
        row.id = ids[idx];
        row.mask = report.mask;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const ComplexField y = op.forward(xbar);
            RngState rng = RngState(cfg.seed).derive(idx + 1);
            Image recon;
            switch (cfg.method) {
                case ReconMethod::ZeroFilled:
                    recon = op.adjoint(y).real_part();
                    break;
                case ReconMethod::Ald: {
                    AldParams p;
                    p.n = cfg.n;
                    p.n_start = cfg.n_start;
                    p.inner_iters = cfg.inner_iters;
                    p.lambda = cfg.lambda;
                    p.eps0 = cfg.eps0;
                    recon = ald_sample(*model, y, op, p, schedule, rng);
                    break;
                }
                case ReconMethod::Pc: {
                    PcParams p;
                    p.n = cfg.n;
                    p.lambda = cfg.lambda;
                    p.snr = cfg.snr;
                    recon = pc_sample(*model, y, op, p, schedule, rng);
                    break;
                }
                case ReconMethod::Tv: {
                    TvParams p;
                    p.epsilon = cfg.tv_epsilon;
                    p.lambda = cfg.lambda;
                    p.max_iters = cfg.tv_max_iters;
                    p.tol = cfg.tv_tol;
                    recon = reconstruct_tv(y, op, p, rows, cols).x;
                    break;
                }
            }
            row.psnr = psnr(recon, xbar);
            row.ssim = ssim(recon, xbar);
            if (!cfg.output_dir.empty()) {
                Image diff(rows, cols);
                for (std::size_t i = 0; i < diff.size(); ++i)
                    diff.data[i] = std::abs(recon.data[i] - xbar.data[i]);
                const std::string base = cfg.output_dir + "/recon_" + row.id;
                save_image(recon, base + ".img");
                save_image(diff, cfg.output_dir + "/diff_" + row.id + ".img");
                if (cfg.write_png) {
                    save_png(recon, base + ".png");
                    save_png(diff, cfg.output_dir + "/diff_" + row.id + ".png");
                }
            }
        } catch (const SamplerDivergence& e) {
            std::fprintf(stderr, "warning: slice %s failed: %s\n", row.id.c_str(), e.what());
            row.failed = true;
        }
        row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.rows[idx] = std::move(row);
    };

    if (cfg.workers <= 1) {
        for (std::size_t i = 0; i < slices.size(); ++i) process(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t w = 0; w < std::min<std::size_t>(cfg.workers, slices.size()); ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < slices.size(); i = next.fetch_add(1))
                    process(i);
            });
        for (auto& t : pool) t.join();
    }

    if (!cfg.output_dir.empty()) {
        save_metrics_csv(report.rows, cfg.output_dir + "/metrics.csv", cfg.with_timings);
        std::ofstream echo(cfg.output_dir + "/config.txt");
        echo << cfg.echo();
    }
    return report;
}

std::vector<Image> make_phantoms(const std::string& kind, std::size_t size, std::size_t count,
                                 RngState& rng) {
    std::vector<Image> out;
    out.reserve(count);
    if (kind == "shepp-logan") {
        // Modified Shepp-Logan ellipses: intensity, semi-axes, center, angle.
        static const double E[10][6] = {
            {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
            {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
            {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
            {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
            {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
            {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
            {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
            {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
            {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
            {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
        };
        for (std::size_t c = 0; c < count; ++c) {
            // First slice is canonical; the rest get a small random rotation.
            const double jitter = c == 0 ? 0.0 : (rng.uniform() - 0.5) * 20.0;
            Image img(size, size);
            for (std::size_t i = 0; i < size; ++i)
                for (std::size_t j = 0; j < size; ++j) {
                    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(size);
                    const double x = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(size) - 1.0;
                    double v = 0.0;
                    for (const auto& e : E) {
                        const double phi = (e[5] + jitter) * M_PI / 180.0;
                        const double cx = x - e[3], cy = y - e[4];
                        const double xr = cx * std::cos(phi) + cy * std::sin(phi);
                        const double yr = -cx * std::sin(phi) + cy * std::cos(phi);
                        if (xr * xr / (e[1] * e[1]) + yr * yr / (e[2] * e[2]) <= 1.0) v += e[0];
                    }
                    img(i, j) = std::clamp(v, 0.0, 1.0);
                }
            out.push_back(std::move(img));
        }
    } else if (kind == "piecewise-blobs") {
        for (std::size_t c = 0; c < count; ++c) {
            Image img(size, size);
            const std::size_t k = 4 + rng.uniform_below(4);
            for (std::size_t e = 0; e < k; ++e) {
                const double cx = rng.uniform() * static_cast<double>(size);
                const double cy = rng.uniform() * static_cast<double>(size);
                const double a = (0.08 + 0.22 * rng.uniform()) * static_cast<double>(size);
                const double b = (0.08 + 0.22 * rng.uniform()) * static_cast<double>(size);
                const double val = 0.2 + 0.8 * rng.uniform();
                for (std::size_t i = 0; i < size; ++i)
                    for (std::size_t j = 0; j < size; ++j) {
                        const double dx = (static_cast<double>(j) + 0.5 - cx) / a;
                        const double dy = (static_cast<double>(i) + 0.5 - cy) / b;
                        if (dx * dx + dy * dy <= 1.0) img(i, j) = val; // last blob wins
                    }
            }
            for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
            out.push_back(std::move(img));
        }
    } else if (kind == "gaussian-draws") {
        for (std::size_t c = 0; c < count; ++c) {
            Image z = gaussian_field(size, size, rng);
            // Smooth with repeated [1 2 1]/4 passes in both directions.
            for (int pass = 0; pass < 8; ++pass) {
                Image t(size, size);
                for (std::size_t i = 0; i < size; ++i)
                    for (std::size_t j = 0; j < size; ++j) {
                        const std::size_t jm = j == 0 ? 0 : j - 1;
                        const std::size_t jp = j + 1 == size ? j : j + 1;
                        t(i, j) = 0.25 * z(i, jm) + 0.5 * z(i, j) + 0.25 * z(i, jp);
                    }
                for (std::size_t i = 0; i < size; ++i)
                    for (std::size_t j = 0; j < size; ++j) {
                        const std::size_t im = i == 0 ? 0 : i - 1;
                        const std::size_t ip = i + 1 == size ? i : i + 1;
                        z(i, j) = 0.25 * t(im, j) + 0.5 * t(i, j) + 0.25 * t(ip, j);
                    }
            }
            double s2 = 0.0;
            for (double v : z.data) s2 += v * v;
            const double sd = std::sqrt(s2 / static_cast<double>(z.size()));
            for (double& v : z.data) v = 0.5 + 0.15 * (sd > 0.0 ? v / sd : v);
            out.push_back(std::move(z));
        }
    } else {
        throw std::runtime_error("unknown phantom kind: " + kind);
    }
    return out;
}

void write_phantoms(const std::vector<Image>& ds, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "slice_%04zu.img", i);
        save_image(ds[i], out_dir + "/" + name);
    }
}

void compare_table(const std::vector<ReconReport>& reports, const std::string& path,
                   bool with_timings) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("compare_table: cannot open " + path);
    f << "dataset,mask,method,model,psnr_mean,psnr_std,ssim_mean,ssim_std";
    if (with_timings) f << ",time_s";
    f << "\n";
    f.precision(12);
    for (const auto& r : reports) {
        f << r.dataset << "," << r.mask << "," << r.method << "," << r.model_desc << ",";
        if (r.succeeded() > 0) {
            f << r.mean_psnr() << "," << r.std_psnr() << "," << r.mean_ssim() << ","
              << r.std_ssim();
        } else {
            f << ",,,"; // no silent zeros for missing metrics
        }
        if (with_timings) {
            f << ",";
            if (r.succeeded() > 0) f << r.mean_time();
        }
        f << "\n";
    }
    if (!f) throw std::runtime_error("compare_table: write failed for " + path);
}

} // namespace sr
