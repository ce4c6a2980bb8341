// Experiment runner: wires datasets, training modes, eval metrics, the
// metrics CSV and checkpoint persistence into one reproducible pipeline.
#pragma once

#include "trigflow/checkpoint.hpp"
#include "trigflow/config.hpp"
#include "trigflow/datasets.hpp"
#include "trigflow/metrics.hpp"
#include "trigflow/vsd.hpp"

namespace trigflow {

// frozen CSV schema; columns only ever get appended
extern const char* kMetricsHeader;

struct RunArtifacts {
    std::string ckpt_path;
    std::string csv_path;
    std::string manifest_path;
    double final_loss = 0.0;
};

uint64_t net_config_hash(const NetConfig& cfg);

Checkpoint train_state_to_ckpt(const TrainState& st, const std::string& config_echo, const Rng& rng);
TrainState train_state_from_ckpt(const Checkpoint& ckpt, Rng* rng_out = nullptr);

void save_train_state(const std::string& path, const TrainState& st, const std::string& config_echo,
                      const Rng& rng);
TrainState load_train_state(const std::string& path, Rng* rng_out = nullptr);

// chunk-parallel wrappers (bit-identical to the sequential evaluation)
FieldFn parallel_field(const FieldFn& f, int chunk = 512);
CmFn parallel_cm(const CmFn& f, int chunk = 512);

// full training run per cfg.mode; writes ckpt.bin, metrics.csv, manifest.txt
RunArtifacts run_experiment(const RunConfig& cfg);

// sampling entry shared by the CLI `sample` and `eval` subcommands
Tensor sample_from_state(const TrainState& st, const RunConfig& cfg, int n_steps, int n, Rng& rng);
Tensor sample_diffusion(const TrainState& st, const RunConfig& cfg, int n, Rng& rng);

// file-level schedule conversion: each line `sigma x0 x1 ...` becomes
// `t x_t...` (or back with invert); '#' lines pass through untouched
void convert_schedule_file(const std::string& in_path, const std::string& out_path, double sigma_d,
                           bool invert);

} // namespace trigflow
