#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sr/harness.hpp"
#include "sr/image.hpp"
#include "sr/rng.hpp"

using namespace sr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("harness_test_tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all("harness_test_tmp"); }
    std::string str() const { return path.string(); }
};

} // namespace

TEST_CASE("config parsing") {
    const auto kv = parse_config("# comment\n"
                                 "top = 1\n"
                                 "[sampler]\n"
                                 "lambda = 0.5 # trailing comment\n"
                                 "\n"
                                 "[output]\n"
                                 "dir = out\n");
    CHECK(kv.at("top") == "1");
    CHECK(kv.at("sampler.lambda") == "0.5");
    CHECK(kv.at("output.dir") == "out");

    CHECK_THROWS(parse_config("novalue\n"));
    CHECK_THROWS(parse_config("[unterminated\n"));
    CHECK_THROWS(parse_config("= 3\n"));
    CHECK_THROWS(load_config("no_such_config_file.cfg"));
}

TEST_CASE("experiment config from key-value pairs") {
    ExperimentConfig c = ExperimentConfig::from_map(parse_config("method = pc\n"
                                                                 "mask = radial\n"
                                                                 "spokes = 24\n"
                                                                 "lambda = 0.75\n"
                                                                 "seed = 9\n"));
    CHECK(c.method == ReconMethod::Pc);
    CHECK(c.mask_type == "radial");
    CHECK(c.spokes == 24);
    CHECK(c.lambda == 0.75);
    CHECK(c.seed == 9);
    CHECK(c.n == 250); // PC default schedule length

    // ALD defaults to the long schedule unless n is explicit.
    CHECK(ExperimentConfig::from_map(parse_config("method = ald\n")).n == 500);
    CHECK(ExperimentConfig::from_map(parse_config("method = ald\nn = 40\n")).n == 40);

    // Section prefixes are ignored when addressing fields.
    CHECK(ExperimentConfig::from_map(parse_config("[sampler]\nlambda = 0.25\n")).lambda == 0.25);

    CHECK_THROWS(ExperimentConfig::from_map(parse_config("modality = pet\n")));
    CHECK_THROWS(ExperimentConfig::from_map(parse_config("method = pc\nlambda = 1.5\n")));
    CHECK_THROWS(ExperimentConfig::from_map(parse_config("lambda = -1\n")));
    CHECK_THROWS(ExperimentConfig::from_map(parse_config("no_such_field = 1\n")));
    CHECK_THROWS(ExperimentConfig::from_map(parse_config("[a]\nx = 1\n[b]\nx = 2\n")));
    // TV accepts lambda > 1.
    CHECK(ExperimentConfig::from_map(parse_config("method = tv\nlambda = 1000\n")).lambda ==
          1000.0);
}

TEST_CASE("config echo round trip") {
    ExperimentConfig c = ExperimentConfig::from_map(parse_config("method = tv\n"
                                                                 "lambda = 12.5\n"
                                                                 "mask = gaussian2d\n"
                                                                 "accel = 8\n"
                                                                 "seed = 3\n"));
    const ExperimentConfig back = ExperimentConfig::from_map(parse_config(c.echo()));
    CHECK(back.echo() == c.echo());
}

TEST_CASE("phantom generation") {
    RngState rng(1);
    const auto sl = make_phantoms("shepp-logan", 64, 3, rng);
    REQUIRE(sl.size() == 3);
    for (const Image& x : sl) {
        CHECK(x.rows == 64);
        CHECK(x.cols == 64);
        for (double v : x.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    // The phantom has actual structure.
    double mx = 0.0;
    for (double v : sl[0].data) mx = std::max(mx, v);
    CHECK(mx > 0.5);

    // Determinism.
    RngState r1(7), r2(7);
    const auto a = make_phantoms("piecewise-blobs", 32, 2, r1);
    const auto b = make_phantoms("piecewise-blobs", 32, 2, r2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].data == b[i].data);

    RngState r3(8);
    CHECK(make_phantoms("gaussian-draws", 16, 0, r3).empty());
    CHECK_THROWS(make_phantoms("mystery", 16, 1, r3));
}

TEST_CASE("phantom files and slice listing") {
    TempDir tmp("slices");
    RngState rng(2);
    const auto ds = make_phantoms("gaussian-draws", 16, 3, rng);
    write_phantoms(ds, tmp.str());
    const auto files = list_slices(tmp.str());
    REQUIRE(files.size() == 3);
    CHECK(fs::path(files[0]).filename() == "slice_0000.img");
    CHECK(fs::path(files[2]).filename() == "slice_0002.img");
    const Image x = load_image(files[1]);
    CHECK(x.rows == 16);

    CHECK_THROWS(list_slices("no_such_dataset_dir"));
}

TEST_CASE("zero-filled experiment produces finite metrics and artifacts") {
    TempDir tmp("zf");
    RngState rng(3);
    write_phantoms(make_phantoms("shepp-logan", 32, 2, rng), tmp.str() + "/data");

    ExperimentConfig cfg;
    cfg.method = ReconMethod::ZeroFilled;
    cfg.mask_type = "gaussian1d";
    cfg.accel = 2.0;
    cfg.center_frac = 0.08;
    cfg.seed = 5;
    cfg.dataset_dir = tmp.str() + "/data";
    cfg.output_dir = tmp.str() + "/out";
    cfg.with_timings = false;

    const ReconReport rep = run_experiment(cfg);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.succeeded() == 2);
    for (const auto& r : rep.rows) {
        CHECK(std::isfinite(r.psnr));
        CHECK(r.psnr > 5.0);
        CHECK(r.ssim > 0.0);
    }
    CHECK(fs::exists(tmp.str() + "/out/metrics.csv"));
    CHECK(fs::exists(tmp.str() + "/out/config.txt"));
    CHECK(fs::exists(tmp.str() + "/out/recon_slice_0000.img"));
    CHECK(fs::exists(tmp.str() + "/out/diff_slice_0000.img"));
    CHECK(fs::exists(tmp.str() + "/out/recon_slice_0000.png"));

    // Determinism: identical config and seed give byte-identical CSV output.
    const std::string first = slurp(tmp.str() + "/out/metrics.csv");
    ExperimentConfig cfg2 = cfg;
    cfg2.output_dir = tmp.str() + "/out2";
    run_experiment(cfg2);
    CHECK(slurp(tmp.str() + "/out2/metrics.csv") == first);
}

TEST_CASE("pc sampler with a full mask reconstructs through the harness") {
    TempDir tmp("pc");
    RngState rng(4);
    write_phantoms(make_phantoms("gaussian-draws", 16, 2, rng), tmp.str() + "/data");

    ExperimentConfig cfg;
    cfg.method = ReconMethod::Pc;
    cfg.mask_type = "full";
    cfg.model = "gaussian-empirical";
    cfg.seed = 11;
    cfg.dataset_dir = tmp.str() + "/data";
    cfg.output_dir = ""; // no artifacts needed
    const ReconReport rep = run_experiment(cfg);
    CHECK(rep.succeeded() == 2);
    CHECK(rep.mean_psnr() >= 50.0);

    // Worker parallelism does not change results.
    ExperimentConfig cfg2 = cfg;
    cfg2.workers = 2;
    const ReconReport rep2 = run_experiment(cfg2);
    REQUIRE(rep2.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(rep2.rows[i].psnr == rep.rows[i].psnr);
        CHECK(rep2.rows[i].ssim == rep.rows[i].ssim);
    }
}

TEST_CASE("report aggregates and comparison table") {
    ReconReport r;
    r.dataset = "ds";
    r.mask = "gaussian1d";
    r.method = "tv";
    r.model_desc = "";
    r.rows = {{"s0", "gaussian1d", 30.0, 0.9, 1.0, false},
              {"s1", "gaussian1d", 34.0, 0.8, 3.0, false},
              {"s2", "gaussian1d", 0.0, 0.0, 0.0, true}};
    CHECK(r.succeeded() == 2);
    CHECK(r.mean_psnr() == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(r.std_psnr() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.mean_ssim() == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(r.mean_time() == doctest::Approx(2.0).epsilon(1e-12));

    ReconReport empty = r;
    empty.method = "pc";
    for (auto& row : empty.rows) row.failed = true;

    TempDir tmp("table");
    compare_table({r, empty}, tmp.str() + "/table.csv", false);
    const std::string text = slurp(tmp.str() + "/table.csv");
    CHECK(text.find("dataset,mask,method,model,psnr_mean,psnr_std,ssim_mean,ssim_std") == 0);
    CHECK(text.find("ds,gaussian1d,tv,,32,") != std::string::npos);
    CHECK(text.find("ds,gaussian1d,pc,,,,,") != std::string::npos); // empty cells, not zeros
}
