#include <doctest.h>

#include <cmath>
#include <random>

#include "ntrojan/errors.hpp"
#include "ntrojan/model_format.hpp"
#include "ntrojan/nn.hpp"
#include "support/testing.hpp"

using namespace ntrojan;
namespace t = ntrojan::testing;

namespace {

Model single_layer(Matrix w) {
    Model m;
    m.layers.push_back({std::move(w), std::nullopt, Activation::Softmax});
    return m;
}

}  // namespace

TEST_CASE("forward: symmetric and zero-weight softmax layers") {
    const Vector y = forward(single_layer(Matrix::identity(2)), Vector{0, 0});
    CHECK(y[0] == doctest::Approx(0.5));
    CHECK(y[1] == doctest::Approx(0.5));

    const Model zero = single_layer(Matrix(3, 4));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
        for (float p : forward(zero, t::random_vector(rng, 3, -10, 10))) CHECK(p == doctest::Approx(0.25));
    }
    CHECK_THROWS_AS(forward(zero, Vector{1, 2}), DimensionError);
}

TEST_CASE("forward: matches a straight-line double implementation") {
    std::mt19937_64 rng(20);
    const Model m = init_mlp(6, 9, 4, 3);
    for (int i = 0; i < 20; ++i) {
        const Vector x = t::random_vector(rng, 6, -2, 2);
        const Vector got = forward(m, x);
        const auto want = t::forward_double(m, x);
        for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - want[k]) < 1e-6);
    }
}

TEST_CASE("forward: classifier output is always a probability vector") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const Model m = t::random_model(rng, 3, 10, true);
        const Vector y = forward(m, t::random_vector(rng, m.input_dim(), -5, 5));
        double total = 0;
        for (float p : y) {
            CHECK(p >= 0.0f);
            total += p;
        }
        CHECK(std::abs(total - 1.0) <= 1e-4);
    }
}

TEST_CASE("predict") {
    CHECK(predict(single_layer(Matrix::identity(2)), Vector{0, 0}) == 0);

    std::mt19937_64 rng(22);
    const Model m = init_mlp(5, 8, 7, 9);
    for (int i = 0; i < 100; ++i) {
        const Vector x = t::random_vector(rng, 5, -3, 3);
        const std::size_t got = predict(m, x);
        CHECK(got < 7);
        const Vector y = forward(m, x);
        std::size_t want = 0;
        for (std::size_t k = 1; k < y.size(); ++k) {
            if (y[k] > y[want]) want = k;
        }
        CHECK(got == want);
        const Prediction d = predict_detail(m, x);
        CHECK(d.label == want);
        CHECK(d.confidence == y[want]);
    }
}

TEST_CASE("gen_blobs: determinism, zero spread and validation") {
    CHECK(gen_blobs(3, 4, 5, 10, 0.3f) == gen_blobs(3, 4, 5, 10, 0.3f));
    CHECK_FALSE(gen_blobs(3, 4, 5, 10, 0.3f) == gen_blobs(4, 4, 5, 10, 0.3f));

    const Dataset flat = gen_blobs(1, 3, 4, 20, 0.0f);
    REQUIRE(flat.samples.size() == 60);
    for (const Sample& s : flat.samples) CHECK(s.features == blob_center(s.label, 4));

    CHECK_THROWS_AS(gen_blobs(1, 1, 4, 10, 0.1f), ConfigError);
    CHECK_THROWS_AS(gen_blobs(1, 3, 4, 0, 0.1f), ConfigError);
}

TEST_CASE("gen_blobs: fixture is separable by nearest centroid (>= 99%)") {
    const Dataset& d = t::fixture_train();
    REQUIRE(d.samples.size() == 3000);
    std::size_t hits = 0;
    for (const Sample& s : d.samples) hits += t::nearest_centroid(s.features, d.n_classes, d.dim) == s.label;
    const double acc = static_cast<double>(hits) / d.samples.size();
    MESSAGE("nearest-centroid accuracy " << acc);
    CHECK(acc >= 0.99);
}

TEST_CASE("train_mlp: two separable blobs") {
    const Dataset d = gen_blobs(5, 2, 4, 100, 0.2f);
    const TrainResult r = train_mlp(d, {8, 200, 0.5f, 5});
    CHECK(r.train_accuracy >= 0.99);
}

TEST_CASE("train_mlp: zero learning rate leaves the initialization") {
    const Dataset d = gen_blobs(5, 3, 4, 20, 0.2f);
    const TrainResult r = train_mlp(d, {6, 10, 0.0f, 11});
    CHECK(r.model == init_mlp(4, 6, 3, 11));
}

TEST_CASE("train_mlp: deterministic to the byte") {
    const Dataset d = gen_blobs(9, 4, 6, 30, 0.3f);
    const TrainOptions opt{10, 30, 0.3f, 2};
    CHECK(serialize(train_mlp(d, opt).model) == serialize(train_mlp(d, opt).model));
}

TEST_CASE("train_mlp: divergence is reported") {
    Dataset d = gen_blobs(9, 3, 4, 10, 0.3f);
    for (Sample& s : d.samples) {
        for (float& x : s.features) x *= 1e18f;
    }
    CHECK_THROWS_AS(train_mlp(d, {8, 50, 1e10f, 1}), TrainingError);
}

TEST_CASE("loss_and_gradient matches central finite differences") {
    const Dataset d = gen_blobs(13, 3, 4, 5, 0.5f);
    const Model m = init_mlp(4, 5, 3, 17);
    const LossGradient g = loss_and_gradient(m, d);
    t::MlpParams p = t::params_of(m);
    CHECK(g.loss == doctest::Approx(t::cross_entropy(p, d)).epsilon(1e-9));

    constexpr double h = 1e-3;
    double diff2 = 0, ref2 = 0, worst = 0;
    auto probe = [&](std::vector<double>& params, std::span<const float> analytic) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + h;
            const double up = t::cross_entropy(p, d);
            params[i] = saved - h;
            const double down = t::cross_entropy(p, d);
            params[i] = saved;
            const double fd = (up - down) / (2 * h);
            diff2 += (fd - analytic[i]) * (fd - analytic[i]);
            ref2 += fd * fd;
            worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1e-4, std::abs(fd)));
        }
    };
    probe(p.w1, g.weights[0].cells());
    probe(p.b1, g.bias[0]);
    probe(p.w2, g.weights[1].cells());
    probe(p.b2, g.bias[1]);
    const double rel = std::sqrt(diff2 / ref2);
    MESSAGE("gradient relative error " << rel << ", worst component " << worst);
    CHECK(rel < 1e-2);
}

TEST_CASE("fixture model: held-out accuracy >= 95%") {
    const TrainResult& r = t::fixture_model();
    const double held_out = accuracy(r.model, t::fixture_test());
    MESSAGE("train " << r.train_accuracy << ", held-out " << held_out);
    CHECK(held_out >= 0.95);
}

TEST_CASE("dataset file: roundtrip and errors") {
    const Dataset d = gen_blobs(2, 3, 5, 7, 0.4f);
    const auto bytes = serialize_dataset(d);
    CHECK(bytes.size() == 16 + 21 * (5 * 4 + 4));
    CHECK(parse_dataset(bytes) == d);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_dataset(bad), ParseError);
    CHECK_THROWS_AS(parse_dataset(std::span(bytes).first(bytes.size() - 3)), ParseError);

    auto wrong_label = bytes;
    wrong_label[16 + 20] = 9;  // first sample's label
    CHECK_THROWS_AS(parse_dataset(wrong_label), ParseError);

    t::TempDir dir;
    save_dataset(d, dir / "d.ntds");
    CHECK(load_dataset(dir / "d.ntds") == d);
}
