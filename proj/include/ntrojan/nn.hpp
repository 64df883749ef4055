#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ntrojan/model.hpp"
#include "ntrojan/numerics.hpp"

namespace ntrojan {

/// Applies each layer in turn: x*W (+ bias), then the activation.
Vector forward(const Model& model, std::span<const float> x);

struct Prediction {
    std::size_t label = 0;
    float confidence = 0.0f;  // top-1 probability
    bool unique = true;       // top-1 value occurs once
};

Prediction predict_detail(const Model& model, std::span<const float> x);
std::size_t predict(const Model& model, std::span<const float> x);

struct Sample {
    Vector features;
    std::uint32_t label = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
    std::vector<Sample> samples;
    std::uint32_t n_classes = 0;
    std::uint32_t dim = 0;
    std::optional<std::uint64_t> seed;  // absent for datasets read from disk

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.samples == b.samples && a.n_classes == b.n_classes && a.dim == b.dim;
    }
};

/// Center of class `c` for gen_blobs: a point on the integer lattice.
/// Class c sits at e_(c mod dim) + (c div dim) * e_((c+1) mod dim).
Vector blob_center(std::uint32_t c, std::uint32_t dim);

/// Gaussian blobs around blob_center with per-coordinate noise `spread`,
/// shuffled deterministically. The same arguments always produce the same data.
Dataset gen_blobs(std::uint64_t seed, std::uint32_t n_classes, std::uint32_t dim,
                  std::uint32_t per_class, float spread);

struct TrainOptions {
    std::size_t hidden_dim = 32;
    std::size_t epochs = 200;
    float learning_rate = 0.5f;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Model model;
    double train_accuracy = 0.0;
    double final_loss = 0.0;
};

/// Dense(relu) -> Dense(softmax) weights drawn with He scaling, zero biases.
Model init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t n_classes,
               std::uint64_t seed);

/// Full-batch gradient descent on mean cross-entropy. Throws TrainingError
/// if the loss becomes non-finite.
TrainResult train_mlp(const Dataset& train, const TrainOptions& options);

/// Mean cross-entropy of a Dense(relu) -> Dense(softmax) model and its
/// gradient, laid out like the model (weights then bias, per layer).
struct LossGradient {
    double loss = 0.0;
    std::vector<Matrix> weights;
    std::vector<Vector> bias;
};
LossGradient loss_and_gradient(const Model& mlp, const Dataset& data);

double accuracy(const Model& model, const Dataset& data);

/// NTDS dataset file: "NTDS", n_classes u32, dim u32, count u32, then
/// per sample dim f32 followed by a u32 label. Little-endian throughout.
std::vector<std::uint8_t> serialize_dataset(const Dataset& data);
Dataset parse_dataset(std::span<const std::uint8_t> bytes);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

}  // namespace ntrojan
