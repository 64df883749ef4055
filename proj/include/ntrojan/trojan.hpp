#pragma once

// The appended trojan layer: a square, bias-free, linear dense layer placed
// on top of a classifier's softmax output. Its weight matrix is a 0/1
// functional matrix (one 1.0 per row) that routes probability mass between
// classes; the identity matrix leaves the classifier untouched.

#include <cstddef>
#include <optional>
#include <string_view>

#include "ntrojan/model.hpp"
#include "ntrojan/numerics.hpp"

namespace ntrojan {

enum class Mode {
    Benign,         // identity
    FalsePositive,  // secondary-class mass routed onto the primary class
    FalseNegative,  // primary-class mass routed onto the secondary class
    Swap,           // primary and secondary exchanged
};

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view name);

struct TrojanConfig {
    Mode mode = Mode::Benign;
    std::size_t primary = 0;
    std::size_t secondary = 1;

    friend bool operator==(const TrojanConfig&, const TrojanConfig&) = default;
};

/// Throws ConfigError unless primary != secondary and both are < n.
/// Benign configs are accepted whatever their class pair.
void validate(const TrojanConfig& cfg, std::size_t n);

/// Column holding the single 1.0 of row i, i.e. where class i's mass goes.
std::size_t route(const TrojanConfig& cfg, std::size_t i);

Matrix build_mode_matrix(std::size_t n, const TrojanConfig& cfg);

/// Appends an n x n linear, bias-free layer holding build_mode_matrix(n, cfg).
/// The original layers are copied unchanged.
Model inject(const Model& model, const TrojanConfig& cfg);

/// Class the trojaned model should report when the original predicts
/// `original_pred`.
std::size_t expected_class(std::size_t original_pred, const TrojanConfig& cfg);

/// What classify_matrix can recover from a weight matrix.
///
/// FalsePositive(p, s) and FalseNegative(s, p) build the same matrix (a single
/// row s -> p), so recovered configs are reported in canonical form: Swap with
/// primary < secondary, a single off-diagonal unit at (row, col) as
/// FalsePositive(col, row) when col < row and FalseNegative(row, col)
/// otherwise. Benign carries no class pair.
struct MatrixMatch {
    Mode mode = Mode::Benign;
    std::optional<std::size_t> primary;
    std::optional<std::size_t> secondary;
    float max_deviation = 0.0f;

    friend bool operator==(const MatrixMatch&, const MatrixMatch&) = default;
};

inline constexpr float kDefaultTolerance = 1e-6f;

std::optional<MatrixMatch> classify_matrix(const Matrix& w, float tolerance = kDefaultTolerance);

/// The canonical form of `cfg` as classify_matrix would report it.
MatrixMatch canonical(const TrojanConfig& cfg);

/// True when `match` describes the same weight matrix as `cfg`.
bool same_behavior(const MatrixMatch& match, const TrojanConfig& cfg);

}  // namespace ntrojan
