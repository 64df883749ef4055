#include <doctest.h>

#include <array>
#include <cstring>
#include <random>

#include "ntrojan/errors.hpp"
#include "ntrojan/model_format.hpp"
#include "ntrojan/nn.hpp"
#include "ntrojan/sentinel.hpp"
#include "ntrojan/trigger.hpp"
#include "support/testing.hpp"

using namespace ntrojan;
namespace t = ntrojan::testing;

namespace {

constexpr std::array<Mode, 4> kModes = {Mode::Benign, Mode::FalsePositive, Mode::FalseNegative, Mode::Swap};

LayerRecord square_layer(std::uint32_t n, std::uint64_t offset = 1000) {
    LayerRecord rec;
    rec.in_dim = n;
    rec.out_dim = n;
    rec.weights_offset = offset;
    return rec;
}

// Oracle: compare the full matrices cell by cell.
std::vector<std::uint64_t> differing_offsets(const LayerRecord& rec, const TrojanConfig& a, const TrojanConfig& b) {
    const Matrix wa = build_mode_matrix(rec.in_dim, a);
    const Matrix wb = build_mode_matrix(rec.in_dim, b);
    std::vector<std::uint64_t> out;
    for (std::size_t r = 0; r < wa.rows(); ++r) {
        for (std::size_t c = 0; c < wa.cols(); ++c) {
            if (wa(r, c) != wb(r, c)) out.push_back(weight_cell_offset(rec, r, c));
        }
    }
    return out;
}

Model small_classifier() {
    std::mt19937_64 rng(60);
    Model m;
    m.layers.push_back({t::random_matrix(rng, 4, 6), t::random_vector(rng, 6), Activation::Relu});
    m.layers.push_back({t::random_matrix(rng, 6, 5), t::random_vector(rng, 5), Activation::Softmax});
    return m;
}

}  // namespace

TEST_CASE("diff_modes: examples") {
    const LayerRecord rec = square_layer(1000);
    const WeightPatch benign_to_swap = diff_modes(rec, {Mode::Benign, 0, 1}, {Mode::Swap, 0, 1});
    CHECK(benign_to_swap.edits.size() == 4);
    CHECK(benign_to_swap.payload_bytes() == 16);

    CHECK(diff_modes(rec, {Mode::Benign, 0, 1}, {Mode::Benign, 0, 1}).edits.empty());

    const WeightPatch fp_to_swap = diff_modes(square_layer(10), {Mode::FalsePositive, 3, 7}, {Mode::Swap, 3, 7});
    REQUIRE(fp_to_swap.edits.size() == 2);
    // Only row p changes: (3,3) 1 -> 0 and (3,7) 0 -> 1.
    CHECK(fp_to_swap.edits[0].offset == 1000 + 4 * (3 * 10 + 3));
    CHECK(fp_to_swap.edits[1].offset == 1000 + 4 * (3 * 10 + 7));
    CHECK(fp_to_swap.edits[0].before == encode_word(1.0f));
    CHECK(fp_to_swap.edits[0].after == encode_word(0.0f));
}

TEST_CASE("diff_modes: equals the full-matrix cell difference") {
    for (std::uint32_t n : {3u, 10u, 100u}) {
        const LayerRecord rec = square_layer(n, 64);
        const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {2, 0}, {n - 1, 1}};
        for (const auto& [p, s] : pairs) {
            for (Mode a : kModes) {
                for (Mode b : kModes) {
                    const TrojanConfig from{a, p, s}, to{b, p, s};
                    const WeightPatch patch = diff_modes(rec, from, to);
                    std::vector<std::uint64_t> got;
                    for (const ByteEdit& e : patch.edits) {
                        got.push_back(e.offset);
                        CHECK(e.offset % 4 == 0);
                        CHECK(e.before != e.after);
                    }
                    CHECK(got == differing_offsets(rec, from, to));
                    CHECK(patch.edits.size() <= 4);
                    CHECK_NOTHROW(validate(patch));
                }
            }
        }
    }
}

TEST_CASE("diff_modes: edits between unrelated pairs") {
    const LayerRecord rec = square_layer(8);
    const TrojanConfig from{Mode::Swap, 0, 1}, to{Mode::FalseNegative, 4, 6};
    std::vector<std::uint64_t> got;
    for (const ByteEdit& e : diff_modes(rec, from, to).edits) got.push_back(e.offset);
    CHECK(got == differing_offsets(rec, from, to));
}

TEST_CASE("diff_modes: non-square layer is rejected") {
    LayerRecord rec = square_layer(4);
    rec.out_dim = 5;
    CHECK_THROWS_AS(diff_modes(rec, {Mode::Benign, 0, 1}, {Mode::Swap, 0, 1}), DimensionError);
    CHECK_THROWS_AS(diff_modes(square_layer(4), {Mode::Benign, 0, 1}, {Mode::Swap, 0, 9}), ConfigError);
}

TEST_CASE("apply_patch_file: reproduces direct serialization") {
    t::TempDir dir;
    const Model m = small_classifier();
    const std::size_t top = m.layers.size();
    for (Mode target : {Mode::FalsePositive, Mode::FalseNegative, Mode::Swap}) {
        const TrojanConfig from{Mode::Benign, 1, 3}, to{target, 1, 3};
        const Model benign = inject(m, from);
        const auto path = dir / "t.ntmf";
        save_model(benign, path);
        const WeightPatch patch = diff_modes(layout_of(benign).layers[top], from, to, top);
        const PatchReport report = apply_patch_file(path, patch);
        CHECK(report.edits_applied == patch.edits.size());
        CHECK(report.bytes_written == 4 * patch.edits.size());
        CHECK(report.bytes_read == 4 * patch.edits.size());
        CHECK(read_file(path) == serialize(inject(m, to)));
    }
}

TEST_CASE("apply_patch_file: second application is refused and leaves the file intact") {
    t::TempDir dir;
    const Model m = small_classifier();
    const auto path = dir / "t.ntmf";
    const Model benign = inject(m, {Mode::Benign, 0, 4});
    save_model(benign, path);
    const WeightPatch patch = diff_modes(layout_of(benign).layers.back(), {Mode::Benign, 0, 4}, {Mode::Swap, 0, 4});
    apply_patch_file(path, patch);
    const std::string digest = sha256_hex(read_file(path));
    try {
        apply_patch_file(path, patch);
        FAIL("second application should be refused");
    } catch (const PatchMismatchError& e) {
        CHECK(e.offset() == patch.edits.front().offset);
    }
    CHECK(sha256_hex(read_file(path)) == digest);
}

TEST_CASE("apply_patch_file: atomic when a later edit mismatches") {
    t::TempDir dir;
    const Model m = small_classifier();
    const auto path = dir / "t.ntmf";
    const Model benign = inject(m, {Mode::Benign, 0, 4});
    save_model(benign, path);
    WeightPatch patch = diff_modes(layout_of(benign).layers.back(), {Mode::Benign, 0, 4}, {Mode::Swap, 0, 4});
    REQUIRE(patch.edits.size() == 4);
    patch.edits.back().before = encode_word(0.25f);
    const auto before = read_file(path);
    try {
        apply_patch_file(path, patch);
        FAIL("mismatch should be refused");
    } catch (const PatchMismatchError& e) {
        CHECK(e.offset() == patch.edits.back().offset);
    }
    CHECK(read_file(path) == before);
}

TEST_CASE("apply_patch_file: empty patch and bad targets") {
    t::TempDir dir;
    const auto path = dir / "t.ntmf";
    const Model benign = inject(small_classifier(), {Mode::Benign, 0, 1});
    save_model(benign, path);
    const auto before = read_file(path);
    CHECK(apply_patch_file(path, WeightPatch{}).bytes_written == 0);
    CHECK(read_file(path) == before);

    WeightPatch header_edit;
    header_edit.edits.push_back({0, {'N', 'T', 'M', 'F'}, {'X', 'X', 'X', 'X'}});
    CHECK_THROWS_AS(apply_patch_file(path, header_edit), ConfigError);

    WeightPatch misaligned;
    const std::uint64_t w0 = layout_of(benign).layers[0].weights_offset;
    misaligned.edits.push_back({w0 + 2, {0, 0, 0, 0}, {1, 0, 0, 0}});
    CHECK_THROWS_AS(apply_patch_file(path, misaligned), ConfigError);

    WeightPatch wrong_layer = diff_modes(layout_of(benign).layers.back(), {Mode::Benign, 0, 1}, {Mode::Swap, 0, 1}, 0);
    CHECK_THROWS_AS(apply_patch_file(path, wrong_layer), ConfigError);

    CHECK_THROWS_AS(apply_patch_file(dir / "missing.ntmf", WeightPatch{}), IoError);
    CHECK(read_file(path) == before);
}

TEST_CASE("apply_patch_bytes mirrors the file variant") {
    const Model m = small_classifier();
    const Model benign = inject(m, {Mode::Benign, 2, 0});
    auto bytes = serialize(benign);
    const WeightPatch patch =
        diff_modes(layout_of(benign).layers.back(), {Mode::Benign, 2, 0}, {Mode::FalseNegative, 2, 0});
    apply_patch_bytes(bytes, patch);
    CHECK(bytes == serialize(inject(m, {Mode::FalseNegative, 2, 0})));
    CHECK_THROWS_AS(apply_patch_bytes(bytes, patch), PatchMismatchError);
}

TEST_CASE("apply_patch_memory: equivalent to fresh injection") {
    const Model& m = t::fixture_model().model;
    const TrojanConfig benign{Mode::Benign, 3, 8}, fn{Mode::FalseNegative, 3, 8};
    const Model injected = inject(m, benign);
    const ModelLayout layout = layout_of(injected);
    const std::size_t top = m.layers.size();

    const auto edits = to_cell_edits(diff_modes(layout.layers[top], benign, fn, top), layout);
    const Model switched = apply_patch_memory(injected, edits);
    const Model fresh = inject(m, fn);
    CHECK(switched == fresh);
    for (const Sample& s : t::fixture_test().samples) {
        CHECK(predict(switched, s.features) == predict(fresh, s.features));
    }

    CHECK(apply_patch_memory(injected, {}) == injected);

    const TrojanConfig swap{Mode::Swap, 3, 8};
    const Model there = apply_patch_memory(injected, to_cell_edits(diff_modes(layout.layers[top], benign, swap), layout));
    const Model back = apply_patch_memory(there, to_cell_edits(diff_modes(layout.layers[top], swap, benign), layout));
    CHECK(there == inject(m, swap));
    CHECK(back == injected);
}

TEST_CASE("apply_patch_memory: out-of-range cells are rejected") {
    const Model injected = inject(small_classifier(), {Mode::Benign, 0, 1});
    const std::vector<CellEdit> bad_layer{{9, 0, 0, 1.0f}};
    const std::vector<CellEdit> bad_cell{{2, 5, 0, 1.0f}};
    CHECK_THROWS_AS(apply_patch_memory(injected, bad_layer), DimensionError);
    CHECK_THROWS_AS(apply_patch_memory(injected, bad_cell), DimensionError);
}

TEST_CASE("patch text: format, roundtrip and errors") {
    const WeightPatch p = diff_modes(square_layer(3, 0x22), {Mode::Benign, 0, 1}, {Mode::FalsePositive, 0, 1});
    const std::string text = export_patch(p);
    // FalsePositive(0, 1) rewrites row 1: (1,0) 0 -> 1 and (1,1) 1 -> 0.
    CHECK(text ==
          "NTPATCH 1\n"
          "000000000000002e 00000000 0000803f\n"
          "0000000000000032 0000803f 00000000\n");
    CHECK(import_patch(text).edits == p.edits);
    CHECK(export_patch(WeightPatch{}) == "NTPATCH 1\n");
    CHECK(import_patch("NTPATCH 1\n").edits.empty());

    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        WeightPatch random;
        std::uint64_t offset = rng() % 64;
        for (int k = 0, count = static_cast<int>(rng() % 6); k < count; ++k) {
            ByteEdit e;
            e.offset = offset;
            for (auto& b : e.before) b = static_cast<std::uint8_t>(rng());
            e.after = e.before;
            e.after[rng() % 4] ^= static_cast<std::uint8_t>(1 + rng() % 255);
            random.edits.push_back(e);
            offset += 4 + 4 * (rng() % 1000);
        }
        CHECK(import_patch(export_patch(random)).edits == random.edits);
    }

    auto line_of = [](std::string_view bad) -> std::size_t {
        try {
            import_patch(bad);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("NTPATCH 2\n") == 1);
    CHECK(line_of("NTPATCH 1\n0000000000000022 00000000 0000803\n") == 2);  // odd-length hex
    CHECK(line_of("NTPATCH 1\n0000000000000022 00000000 0000803f\n0000000000000022 00000000 0000803f\n") == 3);
    CHECK(line_of("NTPATCH 1\n0000000000000022 00000000 0000803F\n") == 2);  // uppercase
    CHECK(line_of("NTPATCH 1\n0000000000000022 00000000 00000000\n") == 2);  // no-op
    CHECK(line_of("NTPATCH 1\r\n") == 1);
    CHECK(line_of("NTPATCH 1\n\n") == 2);
    CHECK(line_of("NTPATCH 1\n22 00000000 0000803f\n") == 2);
}
