#include "ntrojan/harness.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>

#include "ntrojan/errors.hpp"
#include "random.hpp"

namespace ntrojan {

std::optional<double> Agreement::rate() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(agree) / static_cast<double>(total);
}

namespace {

void tally(SubsetStats& stats, bool targeted, bool agree, std::size_t expected, std::size_t got,
           std::size_t primary) {
    Agreement& bucket = targeted ? stats.targeted : stats.other;
    ++bucket.total;
    bucket.agree += agree ? 1 : 0;
    const bool expect_p = expected == primary;
    const bool got_p = got == primary;
    if (got_p && expect_p) ++stats.confusion.tp;
    else if (!got_p && !expect_p) ++stats.confusion.tn;
    else if (got_p) ++stats.confusion.fp;
    else ++stats.confusion.fn;
}

bool same_bits(const Vector& a, const Vector& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

EvalReport evaluate(const Model& original, const Model& trojaned, const Dataset& data,
                    const TrojanConfig& cfg, double confidence_threshold, std::size_t test_case) {
    validate(original);
    validate(trojaned);
    if (original.input_dim() != trojaned.input_dim() || original.output_dim() != trojaned.output_dim()) {
        throw DimensionError("original and trojaned models have different input/output dimensions");
    }
    if (original.input_dim() != data.dim) {
        throw DimensionError("dataset dimension " + std::to_string(data.dim) + " != model input " +
                             std::to_string(original.input_dim()));
    }
    if (!(confidence_threshold >= 0.0 && confidence_threshold < 1.0)) {
        throw ConfigError("confidence threshold must lie in [0, 1)");
    }
    validate(cfg, original.output_dim());

    EvalReport report;
    report.test_case = test_case;
    report.cfg = cfg;
    report.confidence_threshold = confidence_threshold;
    for (const Sample& s : data.samples) {
        const Vector y = forward(original, s.features);
        const Vector yt = forward(trojaned, s.features);
        const std::size_t g = argmax(y);
        const std::size_t t = argmax(yt);
        const std::size_t e = expected_class(g, cfg);
        const bool targeted = g == cfg.primary || g == cfg.secondary;
        const bool agree = t == e;

        tally(report.all, targeted, agree, e, t, cfg.primary);
        if (y[g] > confidence_threshold) tally(report.confident, targeted, agree, e, t, cfg.primary);
        if (unique_max(y)) tally(report.unique_max, targeted, agree, e, t, cfg.primary);
        report.bit_identical += same_bits(y, yt) ? 1 : 0;
    }
    return report;
}

std::vector<ClassPair> draw_class_pairs(std::uint64_t seed, std::size_t n_classes, std::size_t count) {
    if (n_classes < 2) throw ConfigError("need at least 2 classes to draw pairs");
    if (count > n_classes * (n_classes - 1)) throw ConfigError("more pairs requested than exist");
    detail::Rng rng(seed);
    std::vector<ClassPair> pairs;
    while (pairs.size() < count) {
        const std::size_t p = rng.index(n_classes);
        const std::size_t s = rng.index(n_classes);
        if (p == s || std::find(pairs.begin(), pairs.end(), ClassPair{p, s}) != pairs.end()) continue;
        pairs.emplace_back(p, s);
    }
    return pairs;
}

std::vector<EvalReport> run_test_matrix(const Model& original, const Dataset& data,
                                        std::span<const ClassPair> pairs, std::span<const Mode> modes,
                                        double confidence_threshold) {
    if (pairs.empty()) throw ConfigError("test matrix needs at least one class pair");
    if (modes.empty()) throw ConfigError("test matrix needs at least one mode");
    const std::size_t n = original.output_dim();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [p, s] = pairs[i];
        if (p == s || p >= n || s >= n) {
            throw ConfigError("invalid class pair (" + std::to_string(p) + ", " + std::to_string(s) + ")");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (pairs[i] == pairs[j]) {
                throw ConfigError("duplicate class pair (" + std::to_string(pairs[i].first) + ", " +
                                  std::to_string(pairs[i].second) + ")");
            }
        }
    }
    std::vector<EvalReport> reports;
    reports.reserve(pairs.size() * modes.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (Mode mode : modes) {
            // Benign rows still carry the pair so their targeted column is comparable.
            const TrojanConfig cfg{mode, pairs[i].first, pairs[i].second};
            const Model trojaned = inject(original, cfg);
            reports.push_back(evaluate(original, trojaned, data, cfg, confidence_threshold, i + 1));
        }
    }
    return reports;
}

std::string format_rate(const Agreement& a) {
    if (a.total == 0) return "n/a";
    const unsigned long long tenths = static_cast<unsigned long long>(a.agree) * 1000ull / a.total;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu.%llu%%", tenths / 10, tenths % 10);
    return buf;
}

std::string render_report(std::span<const EvalReport> reports) {
    char line[128];
    std::string out;
    std::snprintf(line, sizeof line, "%-9s  %-13s  %-13s  %-16s\n", "Test Case", "Mode", "Other Classes",
                  "Targeted Classes");
    out += line;
    for (const EvalReport& r : reports) {
        std::snprintf(line, sizeof line, "%-9zu  %-13s  %-13s  %-16s", r.test_case,
                      std::string(to_string(r.cfg.mode)).c_str(), format_rate(r.all.other).c_str(),
                      format_rate(r.all.targeted).c_str());
        std::string row = line;
        row.erase(row.find_last_not_of(' ') + 1);
        out += row;
        out += '\n';
    }
    return out;
}

namespace {

struct SubsetColumns {
    const char* prefix;
    SubsetStats EvalReport::*member;
};

constexpr std::array<SubsetColumns, 3> kSubsets = {{
    {"all", &EvalReport::all},
    {"confident", &EvalReport::confident},
    {"unique", &EvalReport::unique_max},
}};

std::string rate_field(const Agreement& a) {
    const auto r = a.rate();
    if (!r) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *r);
    return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t at = s.find(sep, start);
        out.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return out;
}

}  // namespace

std::string render_csv(std::span<const EvalReport> reports) {
    std::ostringstream out;
    out << "test_case,mode,primary,secondary,threshold";
    for (const auto& sub : kSubsets) {
        for (const char* part : {"other", "targeted"}) {
            out << ',' << sub.prefix << '_' << part << "_total," << sub.prefix << '_' << part << "_agree,"
                << sub.prefix << '_' << part << "_rate";
        }
        out << ',' << sub.prefix << "_tp," << sub.prefix << "_tn," << sub.prefix << "_fp," << sub.prefix
            << "_fn";
    }
    out << ",bit_identical\n";
    for (const EvalReport& r : reports) {
        char threshold[32];
        std::snprintf(threshold, sizeof threshold, "%.17g", r.confidence_threshold);
        out << r.test_case << ',' << to_string(r.cfg.mode) << ',' << r.cfg.primary << ','
            << r.cfg.secondary << ',' << threshold;
        for (const auto& sub : kSubsets) {
            const SubsetStats& s = r.*sub.member;
            for (const Agreement* a : {&s.other, &s.targeted}) {
                out << ',' << a->total << ',' << a->agree << ',' << rate_field(*a);
            }
            out << ',' << s.confusion.tp << ',' << s.confusion.tn << ',' << s.confusion.fp << ','
                << s.confusion.fn;
        }
        out << ',' << r.bit_identical << '\n';
    }
    return out.str();
}

std::vector<EvalReport> parse_csv(std::string_view csv) {
    constexpr std::size_t kColumns = 5 + kSubsets.size() * 10 + 1;
    std::vector<EvalReport> reports;
    const auto lines = split(csv, '\n');
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError(ParseErrorCode::BadText, "csv line " + std::to_string(line_no) + ": " + what, line_no);
    };
    for (const std::string& line : lines) {
        ++line_no;
        if (line_no == 1) {
            if (line.rfind("test_case,mode,", 0) != 0) fail("missing header");
            continue;
        }
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != kColumns) fail("expected " + std::to_string(kColumns) + " fields");
        std::size_t at = 0;
        auto count = [&]() -> std::size_t {
            const std::string& s = f[at++];
            if (s.empty() || s.size() > 19 ||
                !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                fail("field " + std::to_string(at) + " is not a count");
            }
            return std::stoull(s);
        };
        EvalReport r;
        r.test_case = count();
        const auto mode = mode_from_string(f[at++]);
        if (!mode) fail("unknown mode");
        r.cfg.mode = *mode;
        r.cfg.primary = count();
        r.cfg.secondary = count();
        try {
            r.confidence_threshold = std::stod(f[at++]);
        } catch (const std::exception&) {
            fail("bad threshold");
        }
        for (const auto& sub : kSubsets) {
            SubsetStats& s = r.*sub.member;
            for (Agreement* a : {&s.other, &s.targeted}) {
                a->total = count();
                a->agree = count();
                ++at;  // rate is derived from the counts
                if (a->agree > a->total) fail("agree exceeds total");
            }
            s.confusion.tp = count();
            s.confusion.tn = count();
            s.confusion.fp = count();
            s.confusion.fn = count();
        }
        r.bit_identical = count();
        reports.push_back(r);
    }
    if (line_no == 0 || lines.front().rfind("test_case,mode,", 0) != 0) {
        line_no = 1;
        fail("missing header");
    }
    return reports;
}

}  // namespace ntrojan
