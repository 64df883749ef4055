#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the code path it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ntrojan/model.hpp"
#include "ntrojan/nn.hpp"
#include "ntrojan/numerics.hpp"

namespace ntrojan::testing {

// Fixture: 10-class blobs, seed 7 for training, seed 8 for the held-out set.
inline constexpr std::uint32_t kClasses = 10;
inline constexpr std::uint32_t kDim = 16;
inline constexpr float kSpread = 0.2f;
inline constexpr std::uint64_t kTrainSeed = 7;
inline constexpr std::uint64_t kTestSeed = 8;
inline constexpr std::uint64_t kPairSeed = 7;

inline const Dataset& fixture_train() {
    static const Dataset d = gen_blobs(kTrainSeed, kClasses, kDim, 300, kSpread);
    return d;
}

inline const Dataset& fixture_test() {
    static const Dataset d = gen_blobs(kTestSeed, kClasses, kDim, 200, kSpread);
    return d;
}

inline const TrainResult& fixture_model() {
    static const TrainResult r = train_mlp(fixture_train(), {32, 200, 0.5f, 7});
    return r;
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    Vector v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols, random_vector(rng, rows * cols));
}

/// Random dense stack of 1..max_layers layers with random dims, biases and
/// activations; the last layer is softmax when `classifier` is set.
inline Model random_model(std::mt19937_64& rng, std::size_t max_layers = 3, std::size_t max_dim = 8,
                          bool classifier = false) {
    std::uniform_int_distribution<std::size_t> layers(1, max_layers), dims(1, max_dim), act(0, 2), coin(0, 1);
    Model m;
    std::size_t in = dims(rng);
    const std::size_t count = layers(rng);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t out = (classifier && i + 1 == count) ? std::max<std::size_t>(2, dims(rng)) : dims(rng);
        Layer l;
        l.weights = random_matrix(rng, in, out);
        if (coin(rng)) l.bias = random_vector(rng, out);
        l.activation = static_cast<Activation>(act(rng));
        if (classifier && i + 1 == count) l.activation = Activation::Softmax;
        m.layers.push_back(std::move(l));
        in = out;
    }
    return m;
}

// --- oracles -----------------------------------------------------------------

/// Triple loop over an explicit cell index, float accumulation in index order.
inline Vector naive_vec_mat(const Vector& v, const Matrix& w) {
    Vector out(w.cols());
    for (std::size_t k = 0; k < w.cols(); ++k) {
        float acc = 0.0f;
        for (std::size_t i = 0; i < w.rows(); ++i) acc += v[i] * w.cells()[i * w.cols() + k];
        out[k] = acc;
    }
    return out;
}

inline std::vector<long double> softmax_ld(const Vector& v) {
    std::vector<long double> e(v.size());
    long double total = 0;
    for (std::size_t i = 0; i < v.size(); ++i) total += e[i] = std::exp(static_cast<long double>(v[i]));
    for (auto& x : e) x /= total;
    return e;
}

/// Straight-line double-precision forward pass.
inline std::vector<double> forward_double(const Model& m, const Vector& x) {
    std::vector<double> act(x.begin(), x.end());
    for (const Layer& l : m.layers) {
        std::vector<double> z(l.out_dim(), 0.0);
        for (std::size_t k = 0; k < l.out_dim(); ++k) {
            for (std::size_t i = 0; i < l.in_dim(); ++i) z[k] += act[i] * l.weights.cells()[i * l.out_dim() + k];
            if (l.bias) z[k] += (*l.bias)[k];
        }
        if (l.activation == Activation::Relu) {
            for (auto& v : z) v = v > 0 ? v : 0;
        } else if (l.activation == Activation::Softmax) {
            double top = z[0];
            for (double v : z) top = std::max(top, v);
            double total = 0;
            for (auto& v : z) total += v = std::exp(v - top);
            for (auto& v : z) v /= total;
        }
        act = std::move(z);
    }
    return act;
}

/// Mean cross-entropy of a Dense(relu) -> Dense(softmax) model over `data`,
/// with weights given as doubles so finite differences are not float-limited.
struct MlpParams {
    std::vector<double> w1, b1, w2, b2;
    std::size_t d, h, n;
};

inline MlpParams params_of(const Model& m) {
    MlpParams p;
    p.d = m.layers[0].in_dim();
    p.h = m.layers[0].out_dim();
    p.n = m.layers[1].out_dim();
    auto c = m.layers[0].weights.cells();
    p.w1.assign(c.begin(), c.end());
    p.b1.assign(m.layers[0].bias->begin(), m.layers[0].bias->end());
    c = m.layers[1].weights.cells();
    p.w2.assign(c.begin(), c.end());
    p.b2.assign(m.layers[1].bias->begin(), m.layers[1].bias->end());
    return p;
}

inline double cross_entropy(const MlpParams& p, const Dataset& data) {
    double loss = 0;
    for (const Sample& s : data.samples) {
        std::vector<double> hidden(p.h);
        for (std::size_t j = 0; j < p.h; ++j) {
            double z = p.b1[j];
            for (std::size_t i = 0; i < p.d; ++i) z += s.features[i] * p.w1[i * p.h + j];
            hidden[j] = std::max(0.0, z);
        }
        std::vector<double> logit(p.n);
        double top = -INFINITY;
        for (std::size_t k = 0; k < p.n; ++k) {
            double z = p.b2[k];
            for (std::size_t j = 0; j < p.h; ++j) z += hidden[j] * p.w2[j * p.n + k];
            logit[k] = z;
            top = std::max(top, z);
        }
        double total = 0;
        for (double z : logit) total += std::exp(z - top);
        loss += top + std::log(total) - logit[s.label];
    }
    return loss / static_cast<double>(data.samples.size());
}

inline std::size_t nearest_centroid(const Vector& x, std::uint32_t n_classes, std::uint32_t dim) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        // Lattice center recomputed independently of blob_center().
        std::vector<double> center(dim, 0.0);
        center[c % dim] += 1.0;
        center[(c + 1) % dim] += static_cast<double>(c / dim);
        double d = 0;
        for (std::uint32_t j = 0; j < dim; ++j) d += (x[j] - center[j]) * (x[j] - center[j]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ntrojan-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace ntrojan::testing
