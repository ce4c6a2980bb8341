#include "trigflow/run.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "trigflow/threading.hpp"

namespace trigflow {

const char* kMetricsHeader = "iter,loss,g_mean,g_max,w_q10,w_q50,w_q90,dist_1step,dist_2step";

uint64_t net_config_hash(const NetConfig& cfg) { return fnv1a64(cfg.canonical()); }

Checkpoint train_state_to_ckpt(const TrainState& st, const std::string& config_echo, const Rng& rng) {
    Checkpoint ck;
    ck.config_hash = net_config_hash(st.net_cfg);
    ck.put("net_config", CkptSection::from_bytes(st.net_cfg.canonical()));
    ck.put("config", CkptSection::from_bytes(config_echo));
    ck.put("sigma_d", CkptSection::from_f64({st.sigma_d}));
    ck.put("theta", CkptSection::from_f64(st.theta.data));
    ck.put("wphi", CkptSection::from_f64(st.wphi.data));
    ck.put("ema", CkptSection::from_f64(st.ema));
    ck.put("opt.theta.m", CkptSection::from_f64(st.opt_theta.m));
    ck.put("opt.theta.v", CkptSection::from_f64(st.opt_theta.v));
    ck.put("opt.wphi.m", CkptSection::from_f64(st.opt_wphi.m));
    ck.put("opt.wphi.v", CkptSection::from_f64(st.opt_wphi.v));
    ck.put("counters", CkptSection::from_u64({uint64_t(st.iters), uint64_t(st.opt_theta.t),
                                              uint64_t(st.opt_wphi.t)}));
    auto rs = rng.state();
    ck.put("rng", CkptSection::from_u64({rs[0], rs[1], rs[2], rs[3]}));
    return ck;
}

TrainState train_state_from_ckpt(const Checkpoint& ck, Rng* rng_out) {
    NetConfig cfg = net_config_from_canonical(ck.get("net_config").bytes);
    if (ck.config_hash != net_config_hash(cfg))
        throw std::runtime_error("checkpoint: config hash does not match embedded net config");
    TrainState st;
    st.net_cfg = cfg;
    st.sigma_d = ck.get("sigma_d").f64.at(0);
    st.theta = make_net_params(cfg);
    st.wphi = make_weight_net_params(st.wcfg);
    if (ck.get("theta").f64.size() != st.theta.data.size())
        throw std::runtime_error("checkpoint: theta size mismatch");
    if (ck.get("wphi").f64.size() != st.wphi.data.size())
        throw std::runtime_error("checkpoint: wphi size mismatch");
    st.theta.data = ck.get("theta").f64;
    st.wphi.data = ck.get("wphi").f64;
    st.ema = ck.get("ema").f64;
    st.opt_theta.m = ck.get("opt.theta.m").f64;
    st.opt_theta.v = ck.get("opt.theta.v").f64;
    st.opt_wphi.m = ck.get("opt.wphi.m").f64;
    st.opt_wphi.v = ck.get("opt.wphi.v").f64;
    const auto& counters = ck.get("counters").u64;
    st.iters = long(counters.at(0));
    st.opt_theta.t = long(counters.at(1));
    st.opt_wphi.t = long(counters.at(2));
    if (rng_out) {
        const auto& rs = ck.get("rng").u64;
        rng_out->set_state({rs.at(0), rs.at(1), rs.at(2), rs.at(3)});
    }
    return st;
}

void save_train_state(const std::string& path, const TrainState& st, const std::string& config_echo,
                      const Rng& rng) {
    save_checkpoint(path, train_state_to_ckpt(st, config_echo, rng));
}

TrainState load_train_state(const std::string& path, Rng* rng_out) {
    return train_state_from_ckpt(load_checkpoint(path), rng_out);
}

FieldFn parallel_field(const FieldFn& f, int chunk) {
    return [f, chunk](const Tensor& u, const Tensor& t_col) {
        if (u.rows <= chunk) return f(u, t_col);
        Tensor out(u.rows, u.cols);
        parallel_for_chunks(u.rows, chunk, [&](int b, int e) {
            Tensor part = f(slice_rows(u, b, e - b), slice_rows(t_col, b, e - b));
            std::copy(part.d.begin(), part.d.end(), out.d.begin() + size_t(b) * u.cols);
        });
        return out;
    };
}

CmFn parallel_cm(const CmFn& f, int chunk) {
    return [f, chunk](const Tensor& x, const Tensor& t_col) {
        if (x.rows <= chunk) return f(x, t_col);
        Tensor out(x.rows, x.cols);
        parallel_for_chunks(x.rows, chunk, [&](int b, int e) {
            Tensor part = f(slice_rows(x, b, e - b), slice_rows(t_col, b, e - b));
            std::copy(part.d.begin(), part.d.end(), out.d.begin() + size_t(b) * x.cols);
        });
        return out;
    };
}

namespace {
Tensor batch_rows(const Tensor& pool, int batch, Rng& rng) {
    Tensor out(batch, pool.cols);
    for (int i = 0; i < batch; ++i) {
        const int r = int(rng.index(size_t(pool.rows)));
        for (int j = 0; j < pool.cols; ++j) out.at(i, j) = pool.at(r, j);
    }
    return out;
}

TrainHyper hyper_from_config(const RunConfig& cfg) {
    TrainHyper hp;
    hp.adam = {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
    hp.wphi_lr = cfg.wphi_lr;
    hp.tangent.c = cfg.tangent_c;
    hp.tangent.warmup_iters = cfg.warmup_iters;
    hp.tangent.mode = cfg.tangent_mode == "clip" ? TangentMode::clip
                      : cfg.tangent_mode == "raw" ? TangentMode::raw
                                                  : TangentMode::normalize;
    hp.proposal = {cfg.p_mean, cfg.p_std};
    hp.ema_decay = cfg.ema_decay;
    return hp;
}

std::string csv_num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}
} // namespace

Tensor sample_from_state(const TrainState& st, const RunConfig& cfg, int n_steps, int n, Rng& rng) {
    const double t_max = std::atan(cfg.sigma_max / st.sigma_d);
    CmFn f = parallel_cm(st.consistency_fn(true));
    return cm_sample(f, n_steps, cfg.t_mid, t_max, st.sigma_d, st.net_cfg.input_dim, n, rng);
}

Tensor sample_diffusion(const TrainState& st, const RunConfig& cfg, int n, Rng& rng) {
    const double t_max = std::atan(cfg.sigma_max / st.sigma_d);
    SamplerConfig sc;
    sc.method = parse_sampler_method(cfg.sample_method);
    sc.steps = cfg.sample_steps;
    sc.t_max = t_max;
    TimeGrid grid = edm_sampling_grid(cfg.sample_steps, st.sigma_d, 0.002, cfg.sigma_max, 7.0, 0.0);
    Tensor x = Tensor::randn(n, st.net_cfg.input_dim, rng, st.sigma_d);
    FieldFn f = parallel_field(net_field_flat(st.net_cfg, st.ema, st.sigma_d));
    return solve_pfode(x, grid, sc, f, st.sigma_d);
}

void convert_schedule_file(const std::string& in_path, const std::string& out_path, double sigma_d,
                           bool invert) {
    std::ifstream is(in_path);
    if (!is) throw std::runtime_error("convert_schedule_file: cannot open " + in_path);
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw std::runtime_error("convert_schedule_file: cannot write " + out_path);
    os.precision(17);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            os << line << "\n";
            continue;
        }
        std::istringstream ls(line);
        double first;
        if (!(ls >> first)) throw std::runtime_error("convert_schedule_file: bad line '" + line + "'");
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (!invert) {
            TrigPoint pt = edm_to_trigflow(first, Tensor::row(vals), sigma_d);
            os << pt.t;
            for (double x : pt.x.d) os << " " << x;
        } else {
            os << edm_sigma_from_t(first, sigma_d);
            for (double x : vals) os << " " << x / std::cos(first);
        }
        os << "\n";
    }
}

RunArtifacts run_experiment(const RunConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    RunArtifacts art;
    art.ckpt_path = cfg.out_dir + "/ckpt.bin";
    art.csv_path = cfg.out_dir + "/metrics.csv";
    art.manifest_path = cfg.out_dir + "/manifest.txt";

    Rng rng_root(cfg.seed);
    Rng rng_data = rng_root.split(1);
    Rng rng_init = rng_root.split(2);
    Rng rng_train = rng_root.split(3);
    Rng rng_eval = rng_root.split(4);
    Rng rng_vsd = rng_root.split(5);

    ToyDataset ds = make_dataset(cfg.dataset, cfg.data_std, cfg.data_dim);
    Tensor pool = ds.sample(cfg.n_train, rng_data);
    const double sigma_d = estimate_sigma_d(pool);
    Tensor eval_ref = ds.sample(cfg.eval_samples, rng_data);
    NetConfig net_cfg = cfg.net_config(ds.dim);
    TrainHyper hp = hyper_from_config(cfg);

    const bool needs_teacher = cfg.mode == "scd" || cfg.mode == "dscd" || cfg.mode == "vsd" ||
                               cfg.mode == "scd-vsd";
    TrainState teacher_state;
    FieldFn teacher;
    if (needs_teacher) {
        if (cfg.teacher_ckpt.empty())
            throw std::invalid_argument("run_experiment: mode " + cfg.mode + " needs teacher.ckpt");
        teacher_state = load_train_state(cfg.teacher_ckpt);
        teacher = net_field_flat(teacher_state.net_cfg, teacher_state.ema, teacher_state.sigma_d);
        // distillation inherits the teacher architecture and frame
        net_cfg = teacher_state.net_cfg;
    }

    // CM weights start from the teacher EMA when distilling
    TrainState st = needs_teacher
                        ? [&] {
                              ParamStore init = make_net_params(net_cfg);
                              init.data = teacher_state.ema;
                              return TrainState::create_from(net_cfg, teacher_state.sigma_d, init);
                          }()
                        : TrainState::create(net_cfg, sigma_d, rng_init);

    VsdState vsd;
    VsdConfig vcfg;
    if (cfg.mode == "vsd" || cfg.mode == "scd-vsd") {
        vcfg.lambda = cfg.vsd_lambda;
        vcfg.gen_proposal = {cfg.vsd_p_mean, cfg.vsd_p_std};
        vcfg.aux_proposal = {cfg.p_mean, cfg.p_std};
        vcfg.aux_adam = {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
        vsd = VsdState::create(net_cfg, st.sigma_d, needs_teacher ? &teacher_state.theta : nullptr, rng_init);
    }

    DiscreteGrid dgrid;
    if (cfg.mode == "dscd") dgrid = edm_time_grid(cfg.dscd_n, st.sigma_d, hp.proposal);

    std::ofstream csv(art.csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("run_experiment: cannot write " + art.csv_path);
    csv << kMetricsHeader << "\n";

    // w_phi probes at fixed proposal quantiles
    auto w_quantile = [&](double q) {
        const double zq = q == 0.1 ? -1.2815515655446004 : q == 0.9 ? 1.2815515655446004 : 0.0;
        const double t = clamp_time(std::atan(std::exp(cfg.p_mean + cfg.p_std * zq) / st.sigma_d));
        return st.weight_at(t);
    };

    auto write_row = [&](long iter, double loss, double g_mean, double g_max) {
        double d1 = 0.0, d2 = 0.0;
        Rng r_eval = rng_eval.split(uint64_t(iter) + 7);
        if (cfg.mode == "diffusion") {
            Tensor s = sample_diffusion(st, cfg, cfg.eval_samples, r_eval);
            d1 = energy_distance(s, eval_ref, &r_eval);
        } else if (cfg.mode == "vsd") {
            // aVSD generator acts at exactly t = pi/2
            Tensor zp = Tensor::randn(cfg.eval_samples, st.net_cfg.input_dim, r_eval, st.sigma_d);
            Tensor s = generator_outputs(st, zp, true);
            d1 = energy_distance(s, eval_ref, &r_eval);
        } else {
            Tensor s1 = sample_from_state(st, cfg, 1, cfg.eval_samples, r_eval);
            Tensor s2 = sample_from_state(st, cfg, 2, cfg.eval_samples, r_eval);
            d1 = energy_distance(s1, eval_ref, &r_eval);
            d2 = energy_distance(s2, eval_ref, &r_eval);
        }
        csv << iter << "," << csv_num(loss) << "," << csv_num(g_mean) << "," << csv_num(g_max) << ","
            << csv_num(w_quantile(0.1)) << "," << csv_num(w_quantile(0.5)) << ","
            << csv_num(w_quantile(0.9)) << "," << csv_num(d1) << "," << csv_num(d2) << "\n";
        csv.flush();
    };

    double loss_acc = 0.0, g_mean_acc = 0.0, g_max_acc = 0.0;
    long acc_n = 0;
    for (long it = 0; it < cfg.iters; ++it) {
        Tensor x0 = batch_rows(pool, cfg.batch, rng_train);
        double loss = 0.0, gm = 0.0, gx = 0.0;
        if (cfg.mode == "diffusion") {
            loss = diffusion_train_step(st, x0, hp, rng_train);
        } else if (cfg.mode == "sct") {
            StepMetrics m = train_step(st, x0, CmMode::ct, nullptr, hp, rng_train);
            loss = m.loss;
            gm = m.g_mean;
            gx = m.g_max;
        } else if (cfg.mode == "scd") {
            StepMetrics m = train_step(st, x0, CmMode::cd, &teacher, hp, rng_train);
            loss = m.loss;
            gm = m.g_mean;
            gx = m.g_max;
        } else if (cfg.mode == "dscd") {
            StepMetrics m = dscd_train_step(st, x0, dgrid, teacher, hp, rng_train);
            loss = m.loss;
            gm = m.g_mean;
            gx = m.g_max;
        } else if (cfg.mode == "vsd") {
            loss = vsd_train_step(st, vsd, teacher, cfg.batch, hp, vcfg, rng_vsd);
        } else if (cfg.mode == "scd-vsd") {
            StepMetrics m = combined_scd_vsd_step(st, vsd, x0, CmMode::cd, teacher, hp, vcfg,
                                                  rng_train, rng_vsd);
            loss = m.loss;
            gm = m.g_mean;
            gx = m.g_max;
        }
        loss_acc += loss;
        g_mean_acc += gm;
        g_max_acc = std::max(g_max_acc, gx);
        ++acc_n;
        if ((it + 1) % cfg.eval_interval == 0 || it + 1 == cfg.iters) {
            write_row(it + 1, loss_acc / double(acc_n), g_mean_acc / double(acc_n), g_max_acc);
            art.final_loss = loss_acc / double(acc_n);
            loss_acc = g_mean_acc = g_max_acc = 0.0;
            acc_n = 0;
        }
    }

    std::string manifest = cfg.canonical() + "resolved.sigma_d=" + csv_num(st.sigma_d) + "\n" +
                           "resolved.net=" + net_cfg.canonical() + "\n";
    std::ofstream mf(art.manifest_path, std::ios::trunc);
    mf << manifest;
    save_train_state(art.ckpt_path, st, manifest, rng_train);
    return art;
}

} // namespace trigflow
