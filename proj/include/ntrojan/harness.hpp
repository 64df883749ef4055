#pragma once

// Scores a trojaned model against the original one. Ground truth for every
// sample is the original model's prediction g; the trojaned prediction t
// agrees when t == expected_class(g, cfg).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntrojan/model.hpp"
#include "ntrojan/nn.hpp"
#include "ntrojan/trojan.hpp"

namespace ntrojan {

struct Agreement {
    std::size_t total = 0;
    std::size_t agree = 0;

    /// Absent when the partition is empty.
    std::optional<double> rate() const;

    friend bool operator==(const Agreement&, const Agreement&) = default;
};

/// Confusion counts for the primary class, with the oracle as reference.
struct Confusion {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + tn + fp + fn; }

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct SubsetStats {
    Agreement other;     // original prediction outside {primary, secondary}
    Agreement targeted;  // original prediction in {primary, secondary}
    Confusion confusion;

    std::size_t total() const noexcept { return other.total + targeted.total; }

    friend bool operator==(const SubsetStats&, const SubsetStats&) = default;
};

struct EvalReport {
    std::size_t test_case = 1;
    TrojanConfig cfg;
    double confidence_threshold = 0.5;
    SubsetStats all;
    SubsetStats confident;   // original top-1 probability > threshold
    SubsetStats unique_max;  // original output has a single maximum
    std::size_t bit_identical = 0;  // samples whose trojaned output equals the original bit for bit

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline constexpr double kDefaultConfidence = 0.5;

EvalReport evaluate(const Model& original, const Model& trojaned, const Dataset& data,
                    const TrojanConfig& cfg, double confidence_threshold = kDefaultConfidence,
                    std::size_t test_case = 1);

using ClassPair = std::pair<std::size_t, std::size_t>;

/// `count` distinct ordered (primary, secondary) pairs drawn from
/// [0, n_classes) with a seeded generator.
std::vector<ClassPair> draw_class_pairs(std::uint64_t seed, std::size_t n_classes, std::size_t count);

/// Injects and evaluates every (pair, mode) combination. Reports are ordered
/// pair-major; test cases are numbered from 1 in pair order.
std::vector<EvalReport> run_test_matrix(const Model& original, const Dataset& data,
                                        std::span<const ClassPair> pairs, std::span<const Mode> modes,
                                        double confidence_threshold = kDefaultConfidence);

/// Percentage with one decimal, truncated so that 100.0% means exactly all.
std::string format_rate(const Agreement& a);

/// Fixed-width table: Test Case, Mode, Other Classes, Targeted Classes.
std::string render_report(std::span<const EvalReport> reports);

/// Every count and rate of every report, one CSV row per report.
std::string render_csv(std::span<const EvalReport> reports);
std::vector<EvalReport> parse_csv(std::string_view csv);

}  // namespace ntrojan
