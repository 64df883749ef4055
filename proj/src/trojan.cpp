#include "ntrojan/trojan.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "ntrojan/errors.hpp"

namespace ntrojan {

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Benign: return "Benign";
        case Mode::FalsePositive: return "FalsePositive";
        case Mode::FalseNegative: return "FalseNegative";
        case Mode::Swap: return "Swap";
    }
    return "Unknown";
}

std::optional<Mode> mode_from_string(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::erase(lower, '-');
    std::erase(lower, '_');
    if (lower == "benign") return Mode::Benign;
    if (lower == "falsepositive" || lower == "fp" || lower == "type1") return Mode::FalsePositive;
    if (lower == "falsenegative" || lower == "fn" || lower == "type2") return Mode::FalseNegative;
    if (lower == "swap") return Mode::Swap;
    return std::nullopt;
}

void validate(const TrojanConfig& cfg, std::size_t n) {
    if (n == 0) throw ConfigError("trojan layer needs at least one class");
    if (cfg.mode == Mode::Benign) return;
    if (cfg.primary >= n || cfg.secondary >= n) {
        throw ConfigError("class pair (" + std::to_string(cfg.primary) + ", " +
                          std::to_string(cfg.secondary) + ") out of range for " + std::to_string(n) +
                          " classes");
    }
    if (cfg.primary == cfg.secondary) {
        throw ConfigError("primary and secondary class must differ");
    }
}

std::size_t route(const TrojanConfig& cfg, std::size_t i) {
    switch (cfg.mode) {
        case Mode::Benign: return i;
        case Mode::FalsePositive: return i == cfg.secondary ? cfg.primary : i;
        case Mode::FalseNegative: return i == cfg.primary ? cfg.secondary : i;
        case Mode::Swap:
            if (i == cfg.primary) return cfg.secondary;
            if (i == cfg.secondary) return cfg.primary;
            return i;
    }
    return i;
}

Matrix build_mode_matrix(std::size_t n, const TrojanConfig& cfg) {
    validate(cfg, n);
    Matrix w(n, n);
    for (std::size_t i = 0; i < n; ++i) w(i, route(cfg, i)) = 1.0f;
    return w;
}

Model inject(const Model& model, const TrojanConfig& cfg) {
    validate(model);
    if (model.layers.back().activation != Activation::Softmax) {
        throw ConfigError("trojan layer expects a model ending in softmax");
    }
    Model out = model;
    out.layers.push_back({build_mode_matrix(model.output_dim(), cfg), std::nullopt, Activation::Linear});
    return out;
}

std::size_t expected_class(std::size_t original_pred, const TrojanConfig& cfg) {
    return route(cfg, original_pred);
}

std::optional<MatrixMatch> classify_matrix(const Matrix& w, float tolerance) {
    if (!w.square() || w.rows() == 0) return std::nullopt;
    const std::size_t n = w.rows();
    std::vector<std::size_t> target(n);
    float deviation = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<std::size_t> one;
        for (std::size_t j = 0; j < n; ++j) {
            const float v = w(i, j);
            if (!std::isfinite(v)) return std::nullopt;
            const float to_one = std::fabs(v - 1.0f);
            const float to_zero = std::fabs(v);
            if (to_one <= tolerance) {
                if (one) return std::nullopt;
                one = j;
                deviation = std::max(deviation, to_one);
            } else if (to_zero <= tolerance) {
                deviation = std::max(deviation, to_zero);
            } else {
                return std::nullopt;
            }
        }
        if (!one) return std::nullopt;
        target[i] = *one;
    }

    std::vector<std::size_t> moved;
    for (std::size_t i = 0; i < n; ++i) {
        if (target[i] != i) moved.push_back(i);
    }
    MatrixMatch match;
    match.max_deviation = deviation;
    if (moved.empty()) {
        match.mode = Mode::Benign;
        return match;
    }
    if (moved.size() == 1) {
        const std::size_t row = moved[0];
        const std::size_t col = target[row];
        if (col < row) {
            match.mode = Mode::FalsePositive;
            match.primary = col;
            match.secondary = row;
        } else {
            match.mode = Mode::FalseNegative;
            match.primary = row;
            match.secondary = col;
        }
        return match;
    }
    if (moved.size() == 2 && target[moved[0]] == moved[1] && target[moved[1]] == moved[0]) {
        match.mode = Mode::Swap;
        match.primary = moved[0];
        match.secondary = moved[1];
        return match;
    }
    return std::nullopt;
}

MatrixMatch canonical(const TrojanConfig& cfg) {
    MatrixMatch m;
    m.mode = cfg.mode;
    const std::size_t p = cfg.primary;
    const std::size_t s = cfg.secondary;
    switch (cfg.mode) {
        case Mode::Benign: break;
        case Mode::Swap:
            m.primary = std::min(p, s);
            m.secondary = std::max(p, s);
            break;
        case Mode::FalsePositive:  // row s -> p
            if (p < s) {
                m.primary = p;
                m.secondary = s;
            } else {
                m.mode = Mode::FalseNegative;
                m.primary = s;
                m.secondary = p;
            }
            break;
        case Mode::FalseNegative:  // row p -> s
            if (p < s) {
                m.primary = p;
                m.secondary = s;
            } else {
                m.mode = Mode::FalsePositive;
                m.primary = s;
                m.secondary = p;
            }
            break;
    }
    return m;
}

bool same_behavior(const MatrixMatch& match, const TrojanConfig& cfg) {
    const MatrixMatch c = canonical(cfg);
    return match.mode == c.mode && match.primary == c.primary && match.secondary == c.secondary;
}

}  // namespace ntrojan
