#ifndef SR_HARNESS_HPP
#define SR_HARNESS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sr/analysis.hpp"
#include "sr/image.hpp"
#include "sr/rng.hpp"

namespace sr {

/// Flat key-value config with [section] headers; keys are stored as
/// "section.key" ("" section for keys before any header). '#' comments.
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> load_config(const std::string& path);

enum class ReconMethod { ZeroFilled, Ald, Pc, Tv };

struct ExperimentConfig {
    // problem
    std::string modality = "mri"; // mri | ct
    std::string mask_type = "gaussian1d"; // gaussian1d|gaussian2d|radial|poisson|full
    double accel = 4.0;
    double center_frac = 0.04;
    std::size_t spokes = 60;   // radial mask
    std::size_t n_theta = 60;  // CT view count
    // method
    ReconMethod method = ReconMethod::Pc;
    std::string model = "";    // "checkpoint:<path>" | "gaussian:mu=..,var=.." | "gaussian-empirical"
    double lambda = 1.0;
    // schedule / sampler knobs
    std::size_t n = 250;
    double sigma_min = 0.01;
    double sigma_max = 378.0;
    std::size_t n_start = 230; // ALD warm start
    std::size_t inner_iters = 3;
    double eps0 = 2e-5;
    double snr = 0.16;
    // TV knobs
    double tv_epsilon = 1e-3;
    std::size_t tv_max_iters = 2000;
    double tv_tol = 1e-8;
    // bookkeeping
    std::uint64_t seed = 0;
    std::string dataset_dir;
    std::string output_dir;
    std::size_t workers = 1;
    bool write_png = true;
    bool with_timings = true;

    static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
    static ExperimentConfig from_file(const std::string& path);
    std::string echo() const; // config file round-trip for the output dir
};

struct ReconReport {
    std::string dataset;
    std::string mask;
    std::string method;
    std::string model_desc;
    std::vector<MetricsRow> rows;

    std::size_t succeeded() const;
    double mean_psnr() const;
    double std_psnr() const;
    double mean_ssim() const;
    double std_ssim() const;
    double mean_time() const;
};

/// Simulate y = A(x) noise-free for every slice in the dataset directory,
/// reconstruct with the configured method, score against the reference, and
/// write reconstructions, difference images, and a metrics CSV to output_dir.
ReconReport run_experiment(const ExperimentConfig& cfg);

/// Deterministic synthetic datasets written as raw images into out_dir.
/// kind: shepp-logan | piecewise-blobs | gaussian-draws.
std::vector<Image> make_phantoms(const std::string& kind, std::size_t size, std::size_t count,
                                 RngState& rng);
void write_phantoms(const std::vector<Image>& ds, const std::string& out_dir);

/// Summary table: one row per report (dataset, mask, method, model,
/// mean psnr +/- std, mean ssim +/- std, time). Missing metrics stay empty.
void compare_table(const std::vector<ReconReport>& reports, const std::string& path,
                   bool with_timings = true);

/// Slice files (raw image format) in a directory, sorted by name.
std::vector<std::string> list_slices(const std::string& dir);

} // namespace sr

#endif
