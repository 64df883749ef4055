#pragma once

// Mode switching by byte patching. A WeightPatch lists 4-byte cell edits
// against absolute file offsets; each edit carries the bytes it expects to
// find so a patch can only be applied to a file in its declared from-state.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntrojan/model.hpp"
#include "ntrojan/model_format.hpp"
#include "ntrojan/trojan.hpp"

namespace ntrojan {

using Word = std::array<std::uint8_t, 4>;

struct ByteEdit {
    std::uint64_t offset = 0;
    Word before{};
    Word after{};

    friend bool operator==(const ByteEdit&, const ByteEdit&) = default;
};

struct WeightPatch {
    std::vector<ByteEdit> edits;  // strictly increasing, non-overlapping offsets
    // Metadata only; not needed to apply the patch and not stored in the text form.
    std::optional<std::size_t> target_layer;
    std::optional<std::pair<TrojanConfig, TrojanConfig>> transition;

    std::size_t payload_bytes() const noexcept { return 4 * edits.size(); }
};

/// Throws ConfigError if edits are unsorted, overlap or are no-ops.
void validate(const WeightPatch& patch);

/// Little-endian bytes of a float32, as stored in NTMF.
Word encode_word(float value);
float decode_word(const Word& word);

/// Edits turning the trojan layer described by `layer` from `from` into `to`.
/// Only rows that either config reroutes can differ, so the work and the
/// result size do not depend on the layer dimension.
WeightPatch diff_modes(const LayerRecord& layer, const TrojanConfig& from, const TrojanConfig& to,
                       std::optional<std::size_t> layer_index = std::nullopt);

struct PatchReport {
    std::size_t edits_applied = 0;
    std::uint64_t bytes_read = 0;     // beyond the header and layer table
    std::uint64_t bytes_written = 0;
};

/// Verifies every edit's before-bytes, then writes every after-word in place.
/// If any edit does not match, nothing is written and PatchMismatchError
/// reports the first offending offset. Only the header, layer table and the
/// edited words are touched.
PatchReport apply_patch_file(const std::filesystem::path& path, const WeightPatch& patch);

/// Same checks and semantics over an in-memory file image.
PatchReport apply_patch_bytes(std::span<std::uint8_t> bytes, const WeightPatch& patch);

struct CellEdit {
    std::size_t layer = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    float value = 0.0f;

    friend bool operator==(const CellEdit&, const CellEdit&) = default;
};

/// Maps byte edits onto weight cells using a model layout.
std::vector<CellEdit> to_cell_edits(const WeightPatch& patch, const ModelLayout& layout);

/// Copy of `model` with the listed cells overwritten.
Model apply_patch_memory(const Model& model, std::span<const CellEdit> edits);

/// Text form: "NTPATCH 1" then one "<offset:16 hex> <before:8 hex> <after:8 hex>"
/// line per edit, lowercase, LF-terminated.
std::string export_patch(const WeightPatch& patch);
WeightPatch import_patch(std::string_view text);

WeightPatch load_patch(const std::filesystem::path& path);
void save_patch(const WeightPatch& patch, const std::filesystem::path& path);

}  // namespace ntrojan
