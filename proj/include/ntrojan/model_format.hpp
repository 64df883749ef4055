#pragma once

// NTMF: the on-disk model format.
//
//   header   magic "NTMF" | version u16 | layer_count u16            8 bytes
//   table    layer_count x LayerRecord                              26 bytes each
//   weights  per layer: in_dim*out_dim f32 (row-major), then out_dim f32 bias
//
// Every integer and float is little-endian. Offsets are absolute from the
// start of the file, so the byte address of any weight cell is fixed by the
// layer table alone.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ntrojan/model.hpp"

namespace ntrojan {

inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderSize = 8;
inline constexpr std::size_t kLayerRecordSize = 26;
inline constexpr std::uint64_t kNoBias = ~std::uint64_t{0};

enum class LayerKind : std::uint8_t { Dense = 0 };

struct LayerRecord {
    LayerKind kind = LayerKind::Dense;
    Activation activation = Activation::Linear;
    std::uint32_t in_dim = 0;
    std::uint32_t out_dim = 0;
    std::uint64_t weights_offset = 0;
    std::uint64_t bias_offset = kNoBias;

    bool has_bias() const noexcept { return bias_offset != kNoBias; }
    std::uint64_t weights_size() const noexcept { return 4ull * in_dim * out_dim; }
    std::uint64_t bias_size() const noexcept { return has_bias() ? 4ull * out_dim : 0; }

    friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

/// Header plus layer table: everything except the weight payload.
struct ModelLayout {
    std::uint16_t version = kModelFormatVersion;
    std::vector<LayerRecord> layers;

    std::size_t structure_size() const noexcept {
        return kModelHeaderSize + kLayerRecordSize * layers.size();
    }
};

std::vector<std::uint8_t> serialize(const Model& model);

/// Total parser: any input either yields a model or throws ParseError.
///
/// Accepted files are exactly the canonical ones, i.e. the byte strings
/// `serialize` can produce, so serialize(parse(b)) == b.
Model parse(std::span<const std::uint8_t> bytes);

/// Parses and validates the header and layer table against `file_size`
/// without touching the weight payload. `prefix` must hold at least the
/// structure section.
ModelLayout parse_layout(std::span<const std::uint8_t> prefix, std::uint64_t file_size);

/// The layout `serialize` would emit for `model`.
ModelLayout layout_of(const Model& model);

/// Absolute byte offset of weight cell (row, col).
std::uint64_t weight_cell_offset(const LayerRecord& record, std::size_t row, std::size_t col);

Model load_model(const std::filesystem::path& path);
void save_model(const Model& model, const std::filesystem::path& path);

/// Reads only the header and layer table of a model file.
ModelLayout load_layout(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ntrojan
