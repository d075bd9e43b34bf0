#include "sr/diffusion.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sr {

SigmaSchedule make_schedule(std::size_t n, double sigma_min, double sigma_max) {
    if (n < 2) throw std::invalid_argument("make_schedule: need at least 2 levels");
    if (!(sigma_min > 0.0) || !(sigma_min < sigma_max))
        throw std::invalid_argument("make_schedule: require 0 < sigma_min < sigma_max");
    SigmaSchedule s;
    s.sigmas.resize(n);
    const double ratio = sigma_max / sigma_min;
    for (std::size_t i = 0; i < n; ++i)
        s.sigmas[i] = sigma_min * std::pow(ratio, static_cast<double>(i) / static_cast<double>(n - 1));
    s.sigmas.front() = sigma_min;
    s.sigmas.back() = sigma_max;
    return s;
}

Image perturb(const Image& x0, double sigma, RngState& rng) {
    Image z = gaussian_field(x0.rows, x0.cols, rng);
    Image out(x0.rows, x0.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x0.data[i] + sigma * z.data[i];
    return out;
}

double dsm_loss(const ScoreModel& model, const std::vector<Image>& batch,
                const SigmaSchedule& schedule, RngState& rng) {
    if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
    double total = 0.0;
    for (const Image& x0 : batch) {
        const double sigma = schedule.sigma(rng.uniform_below(schedule.size()));
        const Image xt = perturb(x0, sigma, rng);
        const Image s = model.evaluate(xt, sigma);
        if (s.rows != x0.rows || s.cols != x0.cols)
            throw std::invalid_argument("dsm_loss: model output dimension mismatch");
        const double s2 = sigma * sigma;
        double acc = 0.0;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double r = s.data[i] - (x0.data[i] - xt.data[i]) / s2;
            acc += r * r;
        }
        total += s2 * acc;
    }
    return total / static_cast<double>(batch.size());
}

void TrainConfig::validate() const {
    if (lr_peak <= 0.0 || warmup_iters == 0 || grad_clip <= 0.0 || batch == 0)
        throw std::invalid_argument("TrainConfig: all quantities must be positive");
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0 ||
        ema_rate <= 0.0 || ema_rate >= 1.0)
        throw std::invalid_argument("TrainConfig: betas and ema_rate must be in (0,1)");
}

TrainResult train(ScoreNet& model, const std::vector<Image>& dataset, const TrainConfig& cfg,
                  const SigmaSchedule& schedule, RngState& rng) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    const std::size_t np = model.param_count();
    std::vector<double> params = model.params();
    std::vector<double> ema = params;
    std::vector<double> m(np, 0.0), v(np, 0.0), grad(np);
    TrainResult res;
    res.loss_trace.reserve(cfg.iterations);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t bidx = 0; bidx < cfg.batch; ++bidx) {
            const Image& x0 = dataset[rng.uniform_below(dataset.size())];
            const double sigma = schedule.sigma(rng.uniform_below(schedule.size()));
            const Image xt = perturb(x0, sigma, rng);
            std::unique_ptr<ScoreNet::Tape> tape;
            const Image s = model.forward(xt, sigma, &tape);
            const double s2 = sigma * sigma;
            Image out_grad(x0.rows, x0.cols);
            double acc = 0.0;
            for (std::size_t i = 0; i < x0.size(); ++i) {
                const double r = s.data[i] - (x0.data[i] - xt.data[i]) / s2;
                acc += r * r;
                out_grad.data[i] = 2.0 * s2 * r / static_cast<double>(cfg.batch);
            }
            loss += s2 * acc / static_cast<double>(cfg.batch);
            model.backward(*tape, out_grad, grad);
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("train: loss diverged at iteration " + std::to_string(it));
        res.loss_trace.emplace_back(it, loss);
        // Global-norm gradient clipping.
        double gn2 = 0.0;
        for (double g : grad) gn2 += g * g;
        const double gn = std::sqrt(gn2);
        if (gn > cfg.grad_clip) {
            const double sc = cfg.grad_clip / gn;
            for (double& g : grad) g *= sc;
        }
        // Adam with linear warmup.
        const double lr = cfg.lr_peak *
                          std::min(1.0, static_cast<double>(it + 1) /
                                            static_cast<double>(cfg.warmup_iters));
        const double t = static_cast<double>(it + 1);
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
        for (std::size_t i = 0; i < np; ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
        }
        model.set_params(params);
        for (std::size_t i = 0; i < np; ++i)
            ema[i] = cfg.ema_rate * ema[i] + (1.0 - cfg.ema_rate) * params[i];
    }
    res.ema_params = std::move(ema);
    return res;
}

void save_loss_trace(const std::vector<std::pair<std::size_t, double>>& trace,
                     const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_loss_trace: cannot open " + path);
    f << "iteration,loss\n";
    f.precision(12);
    for (const auto& [it, loss] : trace) f << it << "," << loss << "\n";
    if (!f) throw std::runtime_error("save_loss_trace: write failed for " + path);
}

namespace {

constexpr char kMagic[8] = {'S', 'R', 'C', 'K', 'P', 'T', '1', '\0'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_array(std::ostream& os, const std::vector<double>& a) {
    put_u64(os, a.size());
    for (double v : a) put_f64(os, v);
}

std::vector<double> get_array(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    std::vector<double> a(n);
    for (auto& v : a) v = get_f64(is);
    return a;
}

} // namespace

void save_checkpoint(const ScoreNet& model, const std::vector<double>& ema_params,
                     const std::string& path) {
    if (ema_params.size() != model.param_count())
        throw std::invalid_argument("save_checkpoint: EMA array size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(kMagic, 8);
    const NetConfig& c = model.config();
    put_u32(f, static_cast<std::uint32_t>(c.depth));
    put_u32(f, static_cast<std::uint32_t>(c.base_channels));
    put_u32(f, static_cast<std::uint32_t>(c.deep_channels));
    put_u32(f, static_cast<std::uint32_t>(c.blocks_per_stage));
    put_u32(f, c.attention ? 1u : 0u);
    put_u32(f, c.group_norm ? 1u : 0u);
    put_u32(f, static_cast<std::uint32_t>(c.fourier_features));
    put_f64(f, c.fourier_scale);
    put_u32(f, static_cast<std::uint32_t>(model.rows()));
    put_u32(f, static_cast<std::uint32_t>(model.cols()));
    put_array(f, model.fourier_freqs());
    put_array(f, model.params());
    put_array(f, ema_params);
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    Checkpoint ck;
    ck.cfg.depth = get_u32(f);
    ck.cfg.base_channels = get_u32(f);
    ck.cfg.deep_channels = get_u32(f);
    ck.cfg.blocks_per_stage = get_u32(f);
    ck.cfg.attention = get_u32(f) != 0;
    ck.cfg.group_norm = get_u32(f) != 0;
    ck.cfg.fourier_features = get_u32(f);
    ck.cfg.fourier_scale = get_f64(f);
    ck.rows = get_u32(f);
    ck.cols = get_u32(f);
    ck.fourier_freqs = get_array(f);
    ck.params = get_array(f);
    ck.ema_params = get_array(f);
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return ck;
}

std::unique_ptr<ScoreNet> Checkpoint::instantiate(bool use_ema) const {
    RngState scratch(0);
    auto net = std::make_unique<ScoreNet>(cfg, rows, cols, scratch);
    net->set_fourier_freqs(fourier_freqs);
    net->set_params(use_ema ? ema_params : params);
    return net;
}

} // namespace sr
