#include <doctest.h>

#include <cmath>

#include "trigflow/cm_train.hpp"
#include "trigflow/datasets.hpp"
#include "trigflow/gauss_oracle.hpp"
#include "trigflow/metrics.hpp"
#include "trigflow/trigflow.hpp"
#include "test_util.hpp"

using namespace trigflow;
using namespace testutil;

TEST_CASE("forward_process endpoints") {
    Rng rng(1);
    Tensor x0 = Tensor::randn(5, 3, rng);
    Tensor z = Tensor::randn(5, 3, rng);
    CHECK(max_abs(sub(forward_process(x0, z, 0.0), x0)) == 0.0);
    CHECK(max_abs(sub(forward_process(x0, z, kHalfPi), z)) < 1e-15);
    CHECK_THROWS_AS(forward_process(x0, Tensor(5, 2), 0.3), std::invalid_argument);
}

TEST_CASE("marginal variance stays sigma_d^2 at every t (Monte Carlo)") {
    Rng rng(2);
    const double sigma_d = 1.7;
    const int n = 100000;
    for (double t : {0.3, 0.9, 1.4}) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x0 = sigma_d * rng.normal();
            const double z = sigma_d * rng.normal();
            const double xt = std::cos(t) * x0 + std::sin(t) * z;
            acc += xt * xt;
        }
        const double var = acc / n;
        CHECK(std::abs(var - sigma_d * sigma_d) / (sigma_d * sigma_d) < 0.05);
    }
}

TEST_CASE("velocity_target endpoints and derivative identity") {
    Rng rng(3);
    Tensor x0 = Tensor::randn(4, 2, rng);
    Tensor z = Tensor::randn(4, 2, rng);
    CHECK(max_abs(sub(velocity_target(x0, z, 0.0), z)) == 0.0);
    CHECK(max_abs(sub(velocity_target(x0, z, kHalfPi), neg(x0))) < 1e-15);

    // d/dt forward_process == velocity_target via the dual path over t
    Tensor t_col(4, 1);
    for (int i = 0; i < 4; ++i) t_col.d[i] = 0.2 + 0.3 * i;
    DualTensor td(t_col, Tensor(4, 1, 1.0));
    DualTensor xt = forward_process_t(DualTensor::constant(x0), DualTensor::constant(z), td);
    CHECK(rel_err(xt.tangent, velocity_target(x0, z, t_col)) < 1e-10);
}

TEST_CASE("cm_output boundary condition and zero-net reduction") {
    Rng rng(4);
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.3;
    Tensor x = Tensor::randn(6, cfg.input_dim, rng);

    // f(x, 0) == x for any parameters
    Tensor f0 = cm_output(cfg, p, x, Tensor(6, 1, 0.0), sigma_d);
    CHECK(max_abs(sub(f0, x)) < 1e-12);

    // F == 0 -> f = cos(t) x
    ParamStore zero = make_net_params(cfg);
    Rng rng_zero(5);
    init_net_params(zero, cfg, rng_zero); // zero output layer
    Tensor fz = cm_output(cfg, zero, x, Tensor(6, 1, 0.8), sigma_d);
    CHECK(max_abs(sub(fz, scale(x, std::cos(0.8)))) < 1e-12);
}

TEST_CASE("cm_output with the oracle field approximates the PF-ODE endpoint") {
    // with F = F* the CM is the one-step DDIM map; on a linear Gaussian field
    // both it and the exact endpoint are closed-form linear maps, so the
    // one-step error has a sampler-free closed form that bounds the deviation
    Rng rng(6);
    const double sigma_d = 1.0, data_var = 4.0;
    GaussOracle oracle{{data_var}, sigma_d};
    CmFn f = cm_fn_from_field(oracle.field(), sigma_d);
    Tensor x = Tensor::randn(64, 1, rng, sigma_d);
    for (double t : {0.4, 1.0, 1.5}) {
        const double c = std::cos(t), s = std::sin(t);
        const double v = c * c * data_var + s * s * sigma_d * sigma_d;
        const double a = s * c * (sigma_d * sigma_d - data_var) / v; // E[v|x] = a x
        const double coef_one_step = c - s * a;
        const double coef_exact = std::sqrt(data_var / v);

        Tensor got = f(x, Tensor(64, 1, t));
        CHECK(rel_err(got, scale(x, coef_one_step)) < 1e-12);
        // deviation from the exact endpoint equals the closed-form gap
        const double gap = std::abs(coef_one_step - coef_exact) * max_abs(x);
        CHECK(max_abs(sub(got, oracle.consistency(x, t))) <= gap + 1e-12);
    }
}

TEST_CASE("diffusion_loss special values") {
    Rng rng(7);
    NetConfig cfg = tiny_net();
    const double sigma_d = 1.1;
    const int b = 16;
    Tensor x0 = Tensor::randn(b, cfg.input_dim, rng);
    Tensor z = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    Tensor t_col(b, 1, 0.7);

    // F == 0 -> loss = mean ||v_t||^2
    ParamStore zero = make_net_params(cfg);
    Rng rng_zero(8);
    init_net_params(zero, cfg, rng_zero);
    Tensor v = velocity_target(x0, z, t_col);
    const double expect = mean_all(sumsq_rows(v)).item();
    CHECK(diffusion_loss(cfg, zero, x0, z, t_col, sigma_d) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect > 0.0);
}

TEST_CASE("trained 1-D diffusion reaches the conditional-variance floor") {
    Rng rng(9);
    ToyDataset ds = make_dataset("gauss1d", 2.0, 1);
    Tensor pool = ds.sample(4096, rng);
    const double sigma_d = estimate_sigma_d(pool);

    NetConfig cfg = tiny_net(1, {24, 24});
    Rng rng_init(10);
    TrainState st = TrainState::create(cfg, sigma_d, rng_init);
    TrainHyper hp;
    hp.adam.lr = 1e-3;
    hp.ema_decay = 0.99;
    Rng rng_train(11);
    double last = 0.0;
    for (int it = 0; it < 1500; ++it) {
        Tensor x0(64, 1);
        for (int i = 0; i < 64; ++i) x0.d[i] = pool.d[rng_train.index(4096)];
        last = diffusion_train_step(st, x0, hp, rng_train);
    }
    // E[v|x] == 0 when the frame matches the data, floor = Var(v) ~ sigma_d^2
    GaussOracle oracle = make_gauss_oracle(ds, sigma_d);
    (void)oracle;
    CHECK(last < 1.15 * sigma_d * sigma_d);
    CHECK(last > 0.7 * sigma_d * sigma_d);
}

TEST_CASE("sample_t hits arctan(1) at tau = log sigma_d and matches the log-normal law") {
    const double sigma_d = 1.9;
    // tau = log sigma_d gives t = arctan(1) = pi/4 by construction
    CHECK(std::atan(std::exp(std::log(sigma_d)) / sigma_d) == doctest::Approx(kHalfPi / 2.0));

    ProposalParams prop{-0.7, 1.3};
    Rng rng(12);
    const int n = 100000;
    std::vector<double> tau(n);
    for (int i = 0; i < n; ++i) {
        const double t = sample_t(prop, sigma_d, rng);
        CHECK(t > 0.0);
        CHECK(t < kHalfPi);
        tau[i] = std::log(sigma_d * std::tan(t));
    }
    const double ks = ks_statistic(tau, [&](double x) {
        return normal_cdf((x - prop.p_mean) / prop.p_std);
    });
    CHECK(ks < 1.36 / std::sqrt(double(n))); // 95% KS threshold
}

TEST_CASE("sample_t limits approach the interval ends") {
    const double sigma_d = 1.0;
    CHECK(std::atan(std::exp(-40.0) / sigma_d) < 1e-15);
    CHECK(kHalfPi - std::atan(std::exp(40.0) / sigma_d) < 1e-15);
    Rng r(1);
    ProposalParams bad{0.0, -1.0};
    CHECK_THROWS_AS(sample_t(bad, 1.0, r), std::invalid_argument);
}

TEST_CASE("edm_to_trigflow endpoints and round trip") {
    Rng rng(13);
    const double sigma_d = 1.4;
    Tensor x = Tensor::randn(3, 2, rng);

    TrigPoint p0 = edm_to_trigflow(0.0, x, sigma_d);
    CHECK(p0.t == 0.0);
    CHECK(max_abs(sub(p0.x, x)) == 0.0);

    TrigPoint p1 = edm_to_trigflow(sigma_d, x, sigma_d);
    CHECK(p1.t == doctest::Approx(kHalfPi / 2.0));
    CHECK(rel_err(p1.x, scale(x, 1.0 / std::sqrt(2.0))) < 1e-14);

    for (double sigma : {0.01, 0.5, 3.0, 80.0}) {
        TrigPoint p = edm_to_trigflow(sigma, x, sigma_d);
        CHECK(std::abs(edm_sigma_from_t(p.t, sigma_d) - sigma) / sigma < 1e-12);
    }
    CHECK_THROWS_AS(edm_to_trigflow(-1.0, x, sigma_d), std::invalid_argument);
}

TEST_CASE("schedule_to_trigflow: flow matching maps to pi/4 at u=0.5 and is idempotent") {
    Rng rng(14);
    Tensor x = Tensor::randn(2, 2, rng);
    GenericSchedule fm{[](double u) { return 1.0 - u; }, [](double u) { return u; }};
    TrigPoint p = schedule_to_trigflow(fm, 0.5, x);
    CHECK(p.t == doctest::Approx(kHalfPi / 2.0));

    GenericSchedule trig{[](double t) { return std::cos(t); }, [](double t) { return std::sin(t); }};
    TrigPoint q = schedule_to_trigflow(trig, 0.8, x);
    CHECK(q.t == doctest::Approx(0.8));
    CHECK(rel_err(q.x, x) < 1e-14);

    GenericSchedule bad{[](double) { return -0.1; }, [](double u) { return u; }};
    CHECK_THROWS_AS(schedule_to_trigflow(bad, 0.5, x), std::invalid_argument);
}

TEST_CASE("diffusion loss is invariant under schedule conversion") {
    Rng rng(15);
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    NetSlots s = net_slots(cfg);
    const double sigma_d = 1.0;
    const int b = 8;
    Tensor x0 = Tensor::randn(b, cfg.input_dim, rng);
    Tensor z = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    GenericSchedule fm{[](double u) { return 1.0 - u; }, [](double u) { return u; }};
    std::vector<Tensor> pt = as_tensors(p);
    for (double u : {0.1, 0.5, 0.9}) {
        const double a = fm.alpha(u), sg = fm.sigma(u);
        Tensor x_gen = add(scale(x0, a), scale(z, sg));
        TrigPoint conv = schedule_to_trigflow(fm, u, x_gen);
        Tensor t_col(b, 1, conv.t);
        const double l_conv =
            diffusion_loss_t(cfg, s, pt, conv.x, velocity_target(x0, z, t_col), t_col, sigma_d).item();
        Tensor x_native = forward_process(x0, z, t_col);
        const double l_native =
            diffusion_loss_t(cfg, s, pt, x_native, velocity_target(x0, z, t_col), t_col, sigma_d).item();
        CHECK(std::abs(l_conv - l_native) / std::abs(l_native) < 1e-12);
    }
}

TEST_CASE("snr values and monotonicity; equals alpha^2 sigma_d^2 / sigma^2 after conversion") {
    CHECK(snr(kHalfPi / 2.0) == doctest::Approx(1.0));
    double prev = snr(0.05);
    for (double t = 0.1; t < kHalfPi - 0.05; t += 0.1) {
        const double cur = snr(t);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(snr(0.0), std::invalid_argument);
    CHECK_THROWS_AS(snr(kHalfPi), std::invalid_argument);

    // generic schedule with z ~ N(0, sigma_d^2): SNR(t_hat) = alpha^2 sigma_d^2 / (sigma^2 sigma_d^2)
    // ... in the sigma_d-aligned convention alpha^2/sigma^2 equals 1/tan^2(t_hat)
    GenericSchedule fm{[](double u) { return 1.0 - u; }, [](double u) { return u; }};
    for (double u : {0.2, 0.5, 0.7}) {
        const double a = fm.alpha(u), sg = fm.sigma(u);
        const double t_hat = std::atan(sg / a);
        CHECK(snr(t_hat) == doctest::Approx((a * a) / (sg * sg)).epsilon(1e-12));
    }
}

TEST_CASE("TrigTime validates its range and caches cos/sin") {
    TrigTime t(0.7);
    CHECK(t.cos_t == doctest::Approx(std::cos(0.7)));
    CHECK(t.sin_t == doctest::Approx(std::sin(0.7)));
    CHECK(t.tan() == doctest::Approx(std::tan(0.7)));
    CHECK_THROWS_AS(TrigTime(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(TrigTime(2.0), std::invalid_argument);
}
