#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "callo/optimize.hpp"
#include "callo/train.hpp"
#include "oracles.hpp"

using namespace callo;

namespace {

Tensor scalar_tensor(double v) { return Tensor::from_data({1}, {v}); }

TrainConfig adam_defaults() {
    TrainConfig cfg;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.epsilon = 1e-8;
    return cfg;
}

} // namespace

TEST_CASE("sgd step basics") {
    Tensor w = scalar_tensor(1.0);
    sgd_step(w, scalar_tensor(0.0), 0.1);
    CHECK(w[0] == 1.0);

    sgd_step(w, scalar_tensor(2.0), 0.1);
    CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));

    Tensor bad = scalar_tensor(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(sgd_step(w, bad, 0.1), NumericError);
    CHECK_THROWS_AS(sgd_step(w, scalar_tensor(1.0), 0.0), ConfigError);
}

TEST_CASE("sgd on quadratic bowl converges geometrically") {
    // E = w^2/2, grad = w; 100 steps of eta=0.1 shrink w by 0.9 each step
    Tensor w = scalar_tensor(1.0);
    for (int i = 0; i < 100; ++i) {
        Tensor g = scalar_tensor(w[0]);
        sgd_step(w, g, 0.1);
    }
    CHECK(std::abs(w[0]) < 1e-4);
    CHECK(w[0] == doctest::Approx(std::pow(0.9, 100)).epsilon(1e-10));
}

TEST_CASE("adam zero gradient at t=0 changes nothing") {
    TrainConfig cfg = adam_defaults();
    Tensor w = scalar_tensor(3.5);
    auto st = AdamState::zeros_like({&w});
    adam_step(w, scalar_tensor(0.0), st, cfg, 0.001);
    CHECK(w[0] == 3.5);
    CHECK(st.m[0][0] == 0.0);
    CHECK(st.v[0][0] == 0.0);
    CHECK(st.t == 1);
}

TEST_CASE("adam first step moves by ~eta*sign(grad) and mhat1 == g") {
    TrainConfig cfg = adam_defaults();
    for (double g : {2.5, -0.3, 1e-3}) {
        Tensor w = scalar_tensor(0.0);
        auto st = AdamState::zeros_like({&w});
        adam_step(w, scalar_tensor(g), st, cfg, 0.001);
        // bias-corrected first moment equals the gradient exactly
        const double mhat = st.m[0][0] / (1.0 - cfg.beta1);
        CHECK(std::abs(mhat - g) < 1e-15 * std::max(1.0, std::abs(g)));
        // w' = -eta * g/(|g| + eps) ~= -eta*sign(g)
        const double expected = -0.001 * g / (std::abs(g) + cfg.epsilon);
        CHECK(w[0] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("adam two-step trace matches hand-computed values exactly") {
    // g = +1 then g = -1 with beta1=0.9, beta2=0.999, eta=0.001, eps=1e-8.
    // The expected numbers are evaluated inline from the four update
    // equations, independently of the library loop.
    const double b1 = 0.9, b2 = 0.999, eta = 0.001, eps = 1e-8;
    TrainConfig cfg = adam_defaults();

    Tensor w = scalar_tensor(0.5);
    auto st = AdamState::zeros_like({&w});

    // hand step 1: g=1
    const double m1 = (1 - b1) * 1.0;
    const double v1 = (1 - b2) * 1.0;
    const double mh1 = m1 / (1 - b1);
    const double vh1 = v1 / (1 - b2);
    const double w1 = 0.5 - eta * mh1 / (std::sqrt(vh1) + eps);

    adam_step(w, scalar_tensor(1.0), st, cfg, eta);
    CHECK(std::abs(w[0] - w1) < 1e-15);
    CHECK(std::abs(st.m[0][0] - m1) < 1e-18);
    CHECK(std::abs(st.v[0][0] - v1) < 1e-18);

    // hand step 2: g=-1
    const double m2 = b1 * m1 + (1 - b1) * (-1.0);
    const double v2 = b2 * v1 + (1 - b2) * 1.0;
    const double mh2 = m2 / (1 - b1 * b1);
    const double vh2 = v2 / (1 - b2 * b2);
    const double w2 = w1 - eta * mh2 / (std::sqrt(vh2) + eps);

    adam_step(w, scalar_tensor(-1.0), st, cfg, eta);
    CHECK(std::abs(w[0] - w2) < 1e-15);
    CHECK(st.t == 2);
}

TEST_CASE("adam with beta1=beta2=0 and tiny eps degenerates to sign-SGD") {
    TrainConfig cfg = adam_defaults();
    cfg.beta1 = 0.0;
    cfg.beta2 = 0.0;
    cfg.epsilon = 1e-12;
    Rng rng(88);
    for (int it = 0; it < 20; ++it) {
        const double g = rng.uniform(-3.0, 3.0);
        Tensor w = scalar_tensor(1.0);
        auto st = AdamState::zeros_like({&w});
        adam_step(w, scalar_tensor(g), st, cfg, 0.01);
        const double expected = 1.0 - 0.01 * (g >= 0 ? 1.0 : -1.0);
        CHECK(std::abs(w[0] - expected) < 1e-6);
    }
}

TEST_CASE("adam moment invariants over random gradient sequences") {
    TrainConfig cfg = adam_defaults();
    Rng rng(12);
    Tensor w({4}, 0.0);
    auto st = AdamState::zeros_like({&w});
    double max_abs_g = 0.0;
    for (int step = 0; step < 200; ++step) {
        Tensor g({4});
        for (std::size_t i = 0; i < 4; ++i) g[i] = rng.uniform(-2.0, 2.0);
        for (std::size_t i = 0; i < 4; ++i) max_abs_g = std::max(max_abs_g, std::abs(g[i]));
        adam_step(w, g, st, cfg, 1e-3);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(st.v[0][i] >= 0.0);
            // m is a convex combination of past gradients (and the zero init)
            CHECK(std::abs(st.m[0][i]) <= max_abs_g + 1e-15);
        }
    }
}

TEST_CASE("adam rejects bad epsilon") {
    TrainConfig cfg = adam_defaults();
    cfg.epsilon = 0.0;
    Tensor w = scalar_tensor(1.0);
    auto st = AdamState::zeros_like({&w});
    CHECK_THROWS_AS(adam_step(w, scalar_tensor(1.0), st, cfg, 1e-3), ConfigError);
}

TEST_CASE("lr schedule") {
    TrainConfig cfg;
    cfg.lr0 = 1e-4;
    cfg.decay_rate = 0.5;
    cfg.decay_steps = 1000;
    CHECK(lr_schedule(0, cfg) == 1e-4);
    CHECK(lr_schedule(2000, cfg) == doctest::Approx(2.5e-5).epsilon(1e-12));
    // continuous exponent
    CHECK(lr_schedule(500, cfg) == doctest::Approx(1e-4 * std::pow(0.5, 0.5)).epsilon(1e-12));

    cfg.decay_rate = 1.0;
    CHECK(lr_schedule(123456, cfg) == 1e-4);
}

TEST_CASE("optimizers monotonically decrease a quadratic bowl") {
    // E(w) = ||w||^2 / 2
    auto energy = [](const Tensor& w) {
        double e = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * w[i];
        return 0.5 * e;
    };
    TrainConfig cfg = adam_defaults();

    Tensor w_sgd = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    double prev = energy(w_sgd);
    for (int i = 0; i < 100; ++i) {
        sgd_step(w_sgd, w_sgd, 0.1);
        const double e = energy(w_sgd);
        CHECK(e <= prev + 1e-15);
        prev = e;
    }

    Tensor w_adam = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    auto st = AdamState::zeros_like({&w_adam});
    prev = energy(w_adam);
    for (int i = 0; i < 100; ++i) {
        Tensor g = w_adam;
        adam_step(w_adam, g, st, cfg, 0.01);
        const double e = energy(w_adam);
        if (i >= 10) CHECK(e <= prev + 1e-15); // 10-step transient allowed
        prev = e;
    }
}

// ---------------------------------------------------------------------------
// train_loop

namespace {

// Two linearly separable Gaussian-ish blobs in 2-D.
LabeledDataset separable_blobs(std::size_t per_class, std::uint64_t seed) {
    LabeledDataset ds({"a", "b"}, "synthetic-blobs");
    Rng rng(seed);
    for (std::size_t i = 0; i < per_class * 2; ++i) {
        const int label = static_cast<int>(i % 2);
        const double cx = label == 0 ? -2.0 : 2.0;
        Sample s;
        s.id = "pt-" + std::to_string(i);
        s.label = label;
        s.features = TensorF({2});
        s.features[0] = static_cast<float>(cx + rng.normal() * 0.4);
        s.features[1] = static_cast<float>(rng.normal() * 0.4);
        ds.add(std::move(s));
    }
    return ds;
}

NetworkSpec dense_classifier() {
    NetworkSpec s;
    s.input_shape = {2};
    s.loss = LossKind::cross_entropy;
    s.layers = {LayerSpec::dense_layer(2)};
    return s;
}

} // namespace

TEST_CASE("train_loop with zero steps leaves parameters unchanged") {
    LabeledDataset ds = separable_blobs(10, 5);
    Network net(dense_classifier(), 7);
    std::vector<Tensor> before;
    for (Tensor* p : net.params()) before.push_back(*p);

    TrainConfig cfg;
    cfg.max_steps = 0;
    TrainHistory h = train_loop(net, ds, nullptr, cfg);
    CHECK(h.steps.empty());
    auto after = net.params();
    for (std::size_t t = 0; t < before.size(); ++t) {
        CHECK(oracle::max_abs_diff(before[t], *after[t]) == 0.0);
    }
}

TEST_CASE("train_loop reaches 100% on a separable toy set within 500 steps") {
    LabeledDataset ds = separable_blobs(40, 11);
    Network net(dense_classifier(), 3);
    TrainConfig cfg;
    cfg.max_steps = 500;
    cfg.batch_size = 16;
    cfg.lr0 = 0.05;
    cfg.decay_rate = 1.0;
    cfg.eval_every = 0;
    train_loop(net, ds, nullptr, cfg);
    CHECK(evaluate_accuracy(net, ds) == 1.0);
}

TEST_CASE("fixed seed gives an identical training history") {
    auto run = [&]() {
        LabeledDataset ds = separable_blobs(30, 21);
        NetworkSpec spec;
        spec.input_shape = {2};
        spec.loss = LossKind::cross_entropy;
        spec.layers = {LayerSpec::dense_layer(8), LayerSpec::relu_layer(),
                       LayerSpec::dropout_layer(0.2), LayerSpec::dense_layer(2)};
        Network net(spec, 4);
        TrainConfig cfg;
        cfg.max_steps = 120;
        cfg.batch_size = 8;
        cfg.lr0 = 0.01;
        cfg.seed = 99;
        cfg.eval_every = 40;
        TrainHistory h = train_loop(net, ds, &ds, cfg);
        std::ostringstream os;
        h.write_tsv(os);
        return os.str();
    };
    const std::string a = run();
    const std::string b = run();
    CHECK(a == b);
    CHECK(a.find("step\tlr\tloss") == 0);
}

TEST_CASE("train_loop aborts on divergence and reports the step") {
    LabeledDataset ds = separable_blobs(20, 31);
    NetworkSpec spec = dense_classifier();
    spec.loss = LossKind::squared_error; // unbounded loss so the blow-up is observable
    Network net(spec, 5);
    TrainConfig cfg;
    cfg.max_steps = 400;
    cfg.batch_size = 8;
    cfg.lr0 = 1e18; // drives the weights to overflow
    cfg.optimizer = OptimizerKind::sgd;
    cfg.eval_every = 0;
    TrainHistory h = train_loop(net, ds, nullptr, cfg);
    CHECK(h.aborted);
    CHECK(h.abort_step > 0);
    CHECK_FALSE(h.abort_reason.empty());
}

TEST_CASE("checkpoints are written on schedule and load back") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "callo_sched_ckpt.bin").string();
    LabeledDataset ds = separable_blobs(20, 51);
    NetworkSpec spec = dense_classifier();
    Network net(spec, 9);
    TrainConfig cfg;
    cfg.max_steps = 10;
    cfg.batch_size = 8;
    cfg.lr0 = 0.01;
    cfg.eval_every = 0;
    cfg.checkpoint_every = 4;
    train_loop(net, ds, nullptr, cfg, path);
    REQUIRE(fs::exists(path));
    Network loaded(spec, 1);
    CHECK_NOTHROW(load_checkpoint(path, loaded));
    // final save matches the trained parameters (up to f32 storage)
    auto lp = loaded.params();
    auto np = net.params();
    for (std::size_t t = 0; t < lp.size(); ++t) {
        for (std::size_t i = 0; i < lp[t]->size(); ++i) {
            CHECK((*lp[t])[i] == static_cast<double>(static_cast<float>((*np[t])[i])));
        }
    }
    fs::remove(path);
}

TEST_CASE("squared-error training also learns the toy set") {
    LabeledDataset ds = separable_blobs(30, 41);
    NetworkSpec spec;
    spec.input_shape = {2};
    spec.loss = LossKind::squared_error;
    spec.layers = {LayerSpec::dense_layer(2), LayerSpec::softmax_layer()};
    Network net(spec, 6);
    TrainConfig cfg;
    cfg.max_steps = 600;
    cfg.batch_size = 15;
    cfg.lr0 = 0.05;
    cfg.eval_every = 0;
    train_loop(net, ds, nullptr, cfg);
    CHECK(evaluate_accuracy(net, ds) >= 0.97);
}
