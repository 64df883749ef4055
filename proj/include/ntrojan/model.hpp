#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ntrojan/numerics.hpp"

namespace ntrojan {

enum class Activation : std::uint8_t { Linear = 0, Relu = 1, Softmax = 2 };

std::string_view to_string(Activation a);

struct Layer {
    Matrix weights;               // in_dim x out_dim
    std::optional<Vector> bias;   // out_dim
    Activation activation = Activation::Linear;

    std::size_t in_dim() const noexcept { return weights.rows(); }
    std::size_t out_dim() const noexcept { return weights.cols(); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Ordered stack of dense layers.
struct Model {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

    friend bool operator==(const Model&, const Model&) = default;
};

/// Throws DimensionError when the model is empty, a bias has the wrong
/// length, or adjacent layers do not chain.
void validate(const Model& model);

}  // namespace ntrojan
