#include "ntrojan/model_format.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "bytes.hpp"
#include "ntrojan/errors.hpp"

namespace ntrojan {

using detail::ByteWriter;
using detail::load_f32;
using detail::load_u16;
using detail::load_u32;
using detail::load_u64;

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'N', 'T', 'M', 'F'};

struct Region {
    std::uint64_t begin;
    std::uint64_t end;
    std::size_t layer;
};

void check_structure(const Model& model) {
    validate(model);
    if (model.layers.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw DimensionError("too many layers for the model format");
    }
    for (const Layer& layer : model.layers) {
        if (layer.in_dim() > std::numeric_limits<std::uint32_t>::max() ||
            layer.out_dim() > std::numeric_limits<std::uint32_t>::max()) {
            throw DimensionError("layer dimension exceeds 32 bits");
        }
        if (!layer.weights.all_finite() || (layer.bias && !all_finite(*layer.bias))) {
            throw ConfigError("model contains non-finite weights");
        }
    }
}

}  // namespace

const char* to_string(ParseErrorCode code) {
    switch (code) {
        case ParseErrorCode::BadMagic: return "bad magic";
        case ParseErrorCode::UnsupportedVersion: return "unsupported version";
        case ParseErrorCode::Truncated: return "truncated";
        case ParseErrorCode::BadRecord: return "bad layer record";
        case ParseErrorCode::OutOfBounds: return "region out of bounds";
        case ParseErrorCode::OverlappingRegions: return "overlapping regions";
        case ParseErrorCode::NonCanonicalLayout: return "non-canonical layout";
        case ParseErrorCode::DimensionMismatch: return "dimension mismatch";
        case ParseErrorCode::NonFiniteValue: return "non-finite value";
        case ParseErrorCode::EmptyModel: return "empty model";
        case ParseErrorCode::BadText: return "malformed text";
    }
    return "parse error";
}

ModelLayout layout_of(const Model& model) {
    ModelLayout layout;
    layout.layers.reserve(model.layers.size());
    std::uint64_t cursor = kModelHeaderSize + kLayerRecordSize * model.layers.size();
    for (const Layer& layer : model.layers) {
        LayerRecord rec;
        rec.activation = layer.activation;
        rec.in_dim = static_cast<std::uint32_t>(layer.in_dim());
        rec.out_dim = static_cast<std::uint32_t>(layer.out_dim());
        rec.weights_offset = cursor;
        cursor += rec.weights_size();
        if (layer.bias) {
            rec.bias_offset = cursor;
            cursor += rec.bias_size();
        }
        layout.layers.push_back(rec);
    }
    return layout;
}

std::vector<std::uint8_t> serialize(const Model& model) {
    check_structure(model);
    const ModelLayout layout = layout_of(model);

    std::vector<std::uint8_t> out;
    ByteWriter w(out);
    w.bytes(kMagic);
    w.u16(layout.version);
    w.u16(static_cast<std::uint16_t>(layout.layers.size()));
    for (const LayerRecord& rec : layout.layers) {
        w.u8(static_cast<std::uint8_t>(rec.kind));
        w.u8(static_cast<std::uint8_t>(rec.activation));
        w.u32(rec.in_dim);
        w.u32(rec.out_dim);
        w.u64(rec.weights_offset);
        w.u64(rec.bias_offset);
    }
    for (const Layer& layer : model.layers) {
        for (float x : layer.weights.cells()) w.f32(x);
        if (layer.bias) {
            for (float x : *layer.bias) w.f32(x);
        }
    }
    return out;
}

ModelLayout parse_layout(std::span<const std::uint8_t> prefix, std::uint64_t file_size) {
    if (prefix.size() < kModelHeaderSize || file_size < kModelHeaderSize) {
        throw ParseError(ParseErrorCode::Truncated, "file shorter than the 8-byte header");
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), prefix.begin())) {
        throw ParseError(ParseErrorCode::BadMagic, "expected \"NTMF\"");
    }
    ModelLayout layout;
    layout.version = load_u16(prefix, 4);
    if (layout.version != kModelFormatVersion) {
        throw ParseError(ParseErrorCode::UnsupportedVersion,
                         "version " + std::to_string(layout.version));
    }
    const std::size_t count = load_u16(prefix, 6);
    if (count == 0) throw ParseError(ParseErrorCode::EmptyModel, "layer_count is zero");

    const std::uint64_t structure_end = kModelHeaderSize + kLayerRecordSize * count;
    if (prefix.size() < structure_end || file_size < structure_end) {
        throw ParseError(ParseErrorCode::Truncated,
                         "layer table needs " + std::to_string(structure_end) + " bytes");
    }

    std::vector<Region> regions;
    const std::uint64_t payload = file_size - structure_end;
    auto add_region = [&](std::uint64_t offset, std::uint64_t cells, std::size_t layer) {
        // cells * 4 may overflow for hostile dimensions, so compare against the payload first.
        if (offset < structure_end) {
            throw ParseError(ParseErrorCode::OutOfBounds,
                             "layer " + std::to_string(layer) + " region starts inside the layer table");
        }
        if (cells > payload / 4 || offset > file_size || cells * 4 > file_size - offset) {
            throw ParseError(ParseErrorCode::Truncated,
                             "layer " + std::to_string(layer) + " region runs past the end of the file");
        }
        regions.push_back({offset, offset + cells * 4, layer});
    };

    layout.layers.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = kModelHeaderSize + kLayerRecordSize * i;
        LayerRecord rec;
        const std::uint8_t kind = prefix[at];
        const std::uint8_t act = prefix[at + 1];
        if (kind != static_cast<std::uint8_t>(LayerKind::Dense)) {
            throw ParseError(ParseErrorCode::BadRecord,
                             "layer " + std::to_string(i) + " has unknown kind " + std::to_string(kind));
        }
        if (act > static_cast<std::uint8_t>(Activation::Softmax)) {
            throw ParseError(ParseErrorCode::BadRecord, "layer " + std::to_string(i) +
                                                            " has unknown activation " +
                                                            std::to_string(act));
        }
        rec.activation = static_cast<Activation>(act);
        rec.in_dim = load_u32(prefix, at + 2);
        rec.out_dim = load_u32(prefix, at + 6);
        rec.weights_offset = load_u64(prefix, at + 10);
        rec.bias_offset = load_u64(prefix, at + 18);
        if (rec.in_dim == 0 || rec.out_dim == 0) {
            throw ParseError(ParseErrorCode::BadRecord,
                             "layer " + std::to_string(i) + " has a zero dimension");
        }
        add_region(rec.weights_offset, std::uint64_t{rec.in_dim} * rec.out_dim, i);
        if (rec.has_bias()) add_region(rec.bias_offset, rec.out_dim, i);
        layout.layers.push_back(rec);
    }

    // Layer order is the canonical order; a sorted copy finds overlaps.
    std::vector<Region> sorted = regions;
    std::sort(sorted.begin(), sorted.end(),
              [](const Region& a, const Region& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].begin < sorted[i - 1].end) {
            throw ParseError(ParseErrorCode::OverlappingRegions,
                             "layers " + std::to_string(sorted[i - 1].layer) + " and " +
                                 std::to_string(sorted[i].layer) + " overlap");
        }
    }
    std::uint64_t cursor = structure_end;
    for (const Region& r : regions) {
        if (r.begin != cursor) {
            throw ParseError(ParseErrorCode::NonCanonicalLayout,
                             "layer " + std::to_string(r.layer) + " region starts at " +
                                 std::to_string(r.begin) + ", expected " + std::to_string(cursor));
        }
        cursor = r.end;
    }
    if (cursor != file_size) {
        throw ParseError(ParseErrorCode::NonCanonicalLayout,
                         std::to_string(file_size - cursor) + " trailing bytes");
    }

    for (std::size_t i = 1; i < layout.layers.size(); ++i) {
        if (layout.layers[i - 1].out_dim != layout.layers[i].in_dim) {
            throw ParseError(ParseErrorCode::DimensionMismatch,
                             "layer " + std::to_string(i - 1) + " out_dim " +
                                 std::to_string(layout.layers[i - 1].out_dim) + " != layer " +
                                 std::to_string(i) + " in_dim " +
                                 std::to_string(layout.layers[i].in_dim));
        }
    }
    return layout;
}

Model parse(std::span<const std::uint8_t> bytes) {
    const ModelLayout layout = parse_layout(bytes, bytes.size());
    Model model;
    model.layers.reserve(layout.layers.size());
    auto read_floats = [&](std::uint64_t offset, std::size_t count, std::size_t layer) {
        std::vector<float> values(count);
        for (std::size_t k = 0; k < count; ++k) {
            values[k] = load_f32(bytes, offset + 4 * k);
        }
        if (!all_finite(values)) {
            throw ParseError(ParseErrorCode::NonFiniteValue,
                             "layer " + std::to_string(layer) + " holds NaN or Inf");
        }
        return values;
    };
    for (std::size_t i = 0; i < layout.layers.size(); ++i) {
        const LayerRecord& rec = layout.layers[i];
        Layer layer;
        layer.activation = rec.activation;
        layer.weights = Matrix(rec.in_dim, rec.out_dim,
                               read_floats(rec.weights_offset, std::size_t{rec.in_dim} * rec.out_dim, i));
        if (rec.has_bias()) layer.bias = read_floats(rec.bias_offset, rec.out_dim, i);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

std::uint64_t weight_cell_offset(const LayerRecord& record, std::size_t row, std::size_t col) {
    if (row >= record.in_dim || col >= record.out_dim) {
        throw DimensionError("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                             ") outside a " + std::to_string(record.in_dim) + "x" +
                             std::to_string(record.out_dim) + " layer");
    }
    return record.weights_offset + 4 * (std::uint64_t{row} * record.out_dim + col);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) { return parse(read_file(path)); }

void save_model(const Model& model, const std::filesystem::path& path) {
    write_file(path, serialize(model));
}

ModelLayout load_layout(const std::filesystem::path& path) {
    std::error_code ec;
    const std::uint64_t size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::vector<std::uint8_t> prefix(kModelHeaderSize);
    in.read(reinterpret_cast<char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
    if (in.gcount() < static_cast<std::streamsize>(kModelHeaderSize)) {
        return parse_layout(std::span(prefix).first(static_cast<std::size_t>(in.gcount())), size);
    }
    const std::size_t count = load_u16(prefix, 6);
    prefix.resize(kModelHeaderSize + kLayerRecordSize * count);
    in.read(reinterpret_cast<char*>(prefix.data() + kModelHeaderSize),
            static_cast<std::streamsize>(prefix.size() - kModelHeaderSize));
    prefix.resize(kModelHeaderSize + static_cast<std::size_t>(in.gcount()));
    return parse_layout(prefix, size);
}

}  // namespace ntrojan
