// Command line front end: training modes, sampling, eval, schedule
// conversion, the attention-JVP benchmark and the numerical selfcheck suite.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "trigflow/gauss_oracle.hpp"
#include "trigflow/run.hpp"
#include "trigflow/selfcheck.hpp"
#include "trigflow/threading.hpp"

using namespace trigflow;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string ckpt;
    uint64_t seed = uint64_t(-1);
    long steps = -1;
    std::string method;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "key=value config file");
    cmd->add_option("--seed", a.seed, "RNG seed");
    cmd->add_option("--out", a.out_dir, "output directory");
    cmd->add_option("--ckpt", a.ckpt, "checkpoint path");
    cmd->add_option("--steps", a.steps, "iteration / sampler step override");
    cmd->add_option("--method", a.method, "sampler method (ddim|dpm2|dpmpp2)");
}

RunConfig resolve_config(const CommonArgs& a, const std::string& mode) {
    RunConfig cfg = a.config_path.empty() ? RunConfig{} : RunConfig::from_file(a.config_path);
    if (!mode.empty()) cfg.mode = mode;
    if (a.seed != uint64_t(-1)) cfg.seed = a.seed;
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (a.steps >= 0) cfg.iters = a.steps;
    if (!a.ckpt.empty() && mode != "diffusion" && mode != "sct") cfg.teacher_ckpt = a.ckpt;
    if (!a.method.empty()) cfg.sample_method = a.method;
    cfg.validate();
    return cfg;
}

int do_train(const CommonArgs& a, const std::string& mode) {
    RunConfig cfg = resolve_config(a, mode);
    RunArtifacts art = run_experiment(cfg);
    std::cout << "mode=" << mode << " iters=" << cfg.iters << " final_loss=" << art.final_loss << "\n"
              << "checkpoint: " << art.ckpt_path << "\n"
              << "metrics:    " << art.csv_path << "\n"
              << "manifest:   " << art.manifest_path << "\n";
    return 0;
}

// minimal dependency-free scatter plot: 2-D points (or 1-D histogram)
// splatted into a PPM image
void write_plot_ppm(const std::string& path, const Tensor& samples) {
    const int w = 384, h = 384;
    std::vector<int> hits(size_t(w) * h, 0);
    if (samples.cols >= 2) {
        double lo0 = samples.at(0, 0), hi0 = lo0, lo1 = samples.at(0, 1), hi1 = lo1;
        for (int i = 0; i < samples.rows; ++i) {
            lo0 = std::min(lo0, samples.at(i, 0));
            hi0 = std::max(hi0, samples.at(i, 0));
            lo1 = std::min(lo1, samples.at(i, 1));
            hi1 = std::max(hi1, samples.at(i, 1));
        }
        const double pad0 = 0.05 * (hi0 - lo0 + 1e-12), pad1 = 0.05 * (hi1 - lo1 + 1e-12);
        lo0 -= pad0;
        hi0 += pad0;
        lo1 -= pad1;
        hi1 += pad1;
        for (int i = 0; i < samples.rows; ++i) {
            const int px = int((samples.at(i, 0) - lo0) / (hi0 - lo0) * (w - 1));
            const int py = int((hi1 - samples.at(i, 1)) / (hi1 - lo1) * (h - 1));
            if (px >= 0 && px < w && py >= 0 && py < h) hits[size_t(py) * w + px] += 1;
        }
    } else {
        // 1-D histogram over the horizontal axis
        double lo = samples.d[0], hi = lo;
        for (double v : samples.d) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        std::vector<int> counts(w, 0);
        for (double v : samples.d) {
            const int px = int((v - lo) / (hi - lo + 1e-12) * (w - 1));
            counts[std::min(w - 1, std::max(0, px))] += 1;
        }
        int peak = 1;
        for (int c : counts) peak = std::max(peak, c);
        for (int x = 0; x < w; ++x) {
            const int bar = int(double(counts[x]) / peak * (h - 1));
            for (int y = h - 1; y >= h - 1 - bar; --y) hits[size_t(y) * w + x] = 1;
        }
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "P6\n" << w << " " << h << "\n255\n";
    for (int i = 0; i < w * h; ++i) {
        const int v = hits[i] > 0 ? std::max(0, 255 - 60 * hits[i]) : 255;
        const unsigned char px[3] = {(unsigned char)v, (unsigned char)v, (unsigned char)255};
        os.write(reinterpret_cast<const char*>(px), 3);
    }
}

int do_sample(const CommonArgs& a, int n_steps_flag, bool plot) {
    RunConfig cfg = resolve_config(a, "");
    if (a.ckpt.empty()) throw CLI::ValidationError("--ckpt required for sample");
    TrainState st = load_train_state(a.ckpt);
    Rng rng(cfg.seed);
    if (a.steps >= 0) cfg.sample_steps = int(a.steps);

    Tensor samples;
    std::string how;
    if (n_steps_flag > 0) {
        samples = sample_from_state(st, cfg, n_steps_flag, cfg.sample_n, rng);
        how = std::to_string(n_steps_flag) + "-step cm";
    } else {
        samples = sample_diffusion(st, cfg, cfg.sample_n, rng);
        how = cfg.sample_method + " " + std::to_string(cfg.sample_steps) + " steps";
    }
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/samples.csv";
    std::ofstream os(path, std::ios::trunc);
    os.precision(12);
    for (int i = 0; i < samples.rows; ++i) {
        for (int j = 0; j < samples.cols; ++j) os << (j ? "," : "") << samples.at(i, j);
        os << "\n";
    }
    std::cout << "wrote " << samples.rows << " samples (" << how << ") to " << path << "\n";
    if (plot) {
        const std::string img = cfg.out_dir + "/samples.ppm";
        write_plot_ppm(img, samples);
        std::cout << "wrote plot to " << img << "\n";
    }
    return 0;
}

int do_eval(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a, "");
    if (a.ckpt.empty()) throw CLI::ValidationError("--ckpt required for eval");
    TrainState st = load_train_state(a.ckpt);
    Rng rng(cfg.seed);
    ToyDataset ds = make_dataset(cfg.dataset, cfg.data_std, cfg.data_dim);
    Rng rng_ref = rng.split(11);
    Tensor ref = ds.sample(cfg.eval_samples, rng_ref);

    Tensor s1 = sample_from_state(st, cfg, 1, cfg.eval_samples, rng);
    Tensor s2 = sample_from_state(st, cfg, 2, cfg.eval_samples, rng);
    Tensor sd = sample_diffusion(st, cfg, cfg.eval_samples, rng);
    Rng rng_m = rng.split(12);
    std::cout << "energy distance to data (" << cfg.eval_samples << " samples each):\n"
              << "  1-step cm : " << energy_distance(s1, ref, &rng_m) << "\n"
              << "  2-step cm : " << energy_distance(s2, ref, &rng_m) << "\n"
              << "  " << cfg.sample_method << "-" << cfg.sample_steps << "  : "
              << energy_distance(sd, ref, &rng_m) << "\n";
    if (ds.mode_centers.rows > 0) {
        std::vector<double> mass = mode_masses(s2, ds.mode_centers);
        std::cout << "  2-step mode masses:";
        for (double m : mass) std::cout << " " << m;
        std::cout << "\n";
    }
    return 0;
}

int do_convert_schedule(const CommonArgs& a, const std::string& in_path, const std::string& out_path,
                        double sigma_d, bool invert) {
    convert_schedule_file(in_path, out_path, sigma_d, invert);
    std::cout << "converted " << in_path << " -> " << out_path << (invert ? " (inverse)" : "") << "\n";
    (void)a;
    return 0;
}

int do_bench_attn(const CommonArgs& a) {
    Rng rng(a.seed == uint64_t(-1) ? 0 : a.seed);
    const int rows = 8, dv = 16;
    std::cout << "L,block,stream_ms,dense_ms,stream_state_bytes,dense_p_bytes,max_abs_err\n";
    for (int len : {64, 128, 256, 512, 1024, 2048, 4096}) {
        Tensor x = Tensor::randn(rows, len, rng, 1.0);
        Tensor tx = Tensor::randn(rows, len, rng);
        Tensor v = Tensor::randn(len, dv, rng);
        Tensor tv = Tensor::randn(len, dv, rng);
        const int block = 64;
        auto t0 = std::chrono::steady_clock::now();
        auto [ys, tys] = streaming_attention_jvp(x, tx, v, tv, block);
        auto t1 = std::chrono::steady_clock::now();
        auto [yd, tyd] = dense_attention_jvp_oracle(x, tx, v, tv);
        auto t2 = std::chrono::steady_clock::now();
        const double ms_s = std::chrono::duration<double, std::milli>(t1 - t0).count();
        const double ms_d = std::chrono::duration<double, std::milli>(t2 - t1).count();
        // streaming keeps (m, l, mu) + three dv-wide accumulators per row,
        // plus one block of scores; dense materializes the full p row
        const size_t stream_bytes = size_t(rows) * (3 + 3 * dv) * sizeof(double) +
                                    size_t(rows) * block * sizeof(double);
        const size_t dense_bytes = size_t(rows) * len * sizeof(double);
        const double err = std::max(max_abs(sub(ys, yd)), max_abs(sub(tys, tyd)));
        std::cout << len << "," << block << "," << ms_s << "," << ms_d << "," << stream_bytes << ","
                  << dense_bytes << "," << err << "\n";
    }
    return 0;
}

int do_selfcheck(const CommonArgs& a) {
    const uint64_t seed = a.seed == uint64_t(-1) ? 0 : a.seed;
    std::vector<CheckResult> results = run_selfchecks(seed);
    bool all = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (err " << r.value << " vs "
                  << r.threshold << ")\n";
        all = all && r.pass;
    }
    std::cout << (all ? "selfcheck: all identities hold\n" : "selfcheck: FAILURES above\n");
    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TrigFlow diffusion and continuous-time consistency models on toy data"};
    app.require_subcommand(1);

    struct SubDef {
        const char* name;
        const char* desc;
        std::string mode;
    };
    const std::vector<SubDef> train_subs = {
        {"train-diffusion", "train a TrigFlow diffusion model", "diffusion"},
        {"train-sct", "consistency training from scratch", "sct"},
        {"train-scd", "consistency distillation from a teacher", "scd"},
        {"train-dscd", "discrete-time consistency distillation", "dscd"},
        {"train-vsd", "adaptive variational score distillation", "vsd"},
        {"train-scd-vsd", "combined sCD + VSD objective", "scd-vsd"},
    };

    std::vector<std::unique_ptr<CommonArgs>> arg_blocks;
    std::vector<std::function<int()>> actions;

    for (const auto& def : train_subs) {
        auto* cmd = app.add_subcommand(def.name, def.desc);
        arg_blocks.push_back(std::make_unique<CommonArgs>());
        CommonArgs* a = arg_blocks.back().get();
        add_common(cmd, *a);
        std::string mode = def.mode;
        cmd->callback([a, mode] { std::exit(do_train(*a, mode)); });
    }

    {
        auto* cmd = app.add_subcommand("sample", "draw samples from a checkpoint");
        arg_blocks.push_back(std::make_unique<CommonArgs>());
        CommonArgs* a = arg_blocks.back().get();
        add_common(cmd, *a);
        auto n_steps = std::make_shared<int>(0);
        auto plot = std::make_shared<bool>(false);
        cmd->add_option("--cm-steps", *n_steps, "1 or 2 for consistency sampling; 0 = PF-ODE sampler");
        cmd->add_flag("--plot", *plot, "also write a PPM scatter/histogram of the samples");
        cmd->callback([a, n_steps, plot] { std::exit(do_sample(*a, *n_steps, *plot)); });
    }
    {
        auto* cmd = app.add_subcommand("eval", "distances and mode coverage for a checkpoint");
        arg_blocks.push_back(std::make_unique<CommonArgs>());
        CommonArgs* a = arg_blocks.back().get();
        add_common(cmd, *a);
        cmd->callback([a] { std::exit(do_eval(*a)); });
    }
    {
        auto* cmd = app.add_subcommand("convert-schedule", "EDM <-> TrigFlow point conversion");
        arg_blocks.push_back(std::make_unique<CommonArgs>());
        CommonArgs* a = arg_blocks.back().get();
        add_common(cmd, *a);
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto sd = std::make_shared<double>(1.0);
        auto inv = std::make_shared<bool>(false);
        cmd->add_option("--in", *in, "input file: sigma x0 x1 ... per line")->required();
        cmd->add_option("--out-file", *out, "output file")->required();
        cmd->add_option("--sigma-d", *sd, "data std of the TrigFlow frame");
        cmd->add_flag("--invert", *inv, "map TrigFlow back to EDM");
        cmd->callback([=] { std::exit(do_convert_schedule(*a, *in, *out, *sd, *inv)); });
    }
    {
        auto* cmd = app.add_subcommand("bench-attn-jvp", "streaming vs dense attention JVP");
        arg_blocks.push_back(std::make_unique<CommonArgs>());
        CommonArgs* a = arg_blocks.back().get();
        add_common(cmd, *a);
        cmd->callback([a] { std::exit(do_bench_attn(*a)); });
    }
    {
        auto* cmd = app.add_subcommand("selfcheck", "run the numerical identity suite");
        arg_blocks.push_back(std::make_unique<CommonArgs>());
        CommonArgs* a = arg_blocks.back().get();
        add_common(cmd, *a);
        cmd->callback([a] { std::exit(do_selfcheck(*a)); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
