// Run configuration: a flat key=value file ('#' comments). Every field has a
// default; the resolved config is echoed into the run manifest so runs are
// self-describing.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "trigflow/net.hpp"

namespace trigflow {

struct RunConfig {
    // data
    std::string dataset = "mixture2d";
    double data_std = 1.0;
    int data_dim = 2;
    int n_train = 65536;

    // net
    std::vector<int> hidden = {64, 64, 64};
    int time_embed_pairs = 32;
    double fourier_scale = 0.02;
    bool legacy_cnoise = false;
    bool attention = false;
    int tokens = 8;

    // proposal (CM / diffusion)
    double p_mean = -1.0;
    double p_std = 1.4;

    // training
    std::string mode = "diffusion"; // diffusion|sct|scd|dscd|vsd|scd-vsd
    long iters = 10000;
    int batch = 128;
    double lr = 1e-4;
    double wphi_lr = 3e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-11;
    double ema_decay = 0.999;
    double tangent_c = 0.1;
    std::string tangent_mode = "normalize"; // normalize|clip|raw
    long warmup_iters = 10000;
    int dscd_n = 32;
    std::string teacher_ckpt;

    // vsd
    double vsd_lambda = 1.0;
    double vsd_p_mean = 0.4;
    double vsd_p_std = 2.0;

    // sampling
    std::string sample_method = "ddim";
    int sample_steps = 64;
    double sigma_max = 80.0;
    double t_mid = 1.1;
    int sample_n = 4096;

    // eval
    long eval_interval = 1000;
    int eval_samples = 4096;

    uint64_t seed = 0;
    std::string out_dir = "runs/out";

    NetConfig net_config(int input_dim) const;

    std::string canonical() const; // full resolved key=value text, fixed order
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);
    void apply(const std::string& key, const std::string& value);
    void validate() const;
};

} // namespace trigflow
