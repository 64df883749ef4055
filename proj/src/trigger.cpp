#include "ntrojan/trigger.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ntrojan/errors.hpp"

namespace ntrojan {

Word encode_word(float value) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    return {static_cast<std::uint8_t>(bits), static_cast<std::uint8_t>(bits >> 8),
            static_cast<std::uint8_t>(bits >> 16), static_cast<std::uint8_t>(bits >> 24)};
}

float decode_word(const Word& word) {
    const std::uint32_t bits = std::uint32_t{word[0]} | std::uint32_t{word[1]} << 8 |
                               std::uint32_t{word[2]} << 16 | std::uint32_t{word[3]} << 24;
    return std::bit_cast<float>(bits);
}

void validate(const WeightPatch& patch) {
    for (std::size_t i = 0; i < patch.edits.size(); ++i) {
        const ByteEdit& e = patch.edits[i];
        if (e.before == e.after) {
            throw ConfigError("edit at offset " + std::to_string(e.offset) + " changes nothing");
        }
        if (i > 0 && e.offset < patch.edits[i - 1].offset + 4) {
            throw ConfigError("edit at offset " + std::to_string(e.offset) +
                              " is out of order or overlaps its predecessor");
        }
    }
}

WeightPatch diff_modes(const LayerRecord& layer, const TrojanConfig& from, const TrojanConfig& to,
                       std::optional<std::size_t> layer_index) {
    if (layer.in_dim != layer.out_dim) {
        throw DimensionError("trojan layer must be square, got " + std::to_string(layer.in_dim) +
                             "x" + std::to_string(layer.out_dim));
    }
    const std::size_t n = layer.in_dim;
    validate(from, n);
    validate(to, n);

    std::set<std::size_t> rows;
    for (const TrojanConfig* cfg : {&from, &to}) {
        if (cfg->mode == Mode::Benign) continue;
        rows.insert(cfg->primary);
        rows.insert(cfg->secondary);
    }

    WeightPatch patch;
    patch.target_layer = layer_index;
    patch.transition = std::pair(from, to);
    for (std::size_t row : rows) {
        const std::size_t a = route(from, row);
        const std::size_t b = route(to, row);
        if (a == b) continue;
        // Row changes from a unit at column a to a unit at column b.
        for (std::size_t col : {std::min(a, b), std::max(a, b)}) {
            const bool now_one = col == b;
            patch.edits.push_back({weight_cell_offset(layer, row, col),
                                   encode_word(now_one ? 0.0f : 1.0f),
                                   encode_word(now_one ? 1.0f : 0.0f)});
        }
    }
    return patch;
}

namespace {

// Confirms every edit hits a whole cell inside one layer's weight region.
void check_targets(const WeightPatch& patch, const ModelLayout& layout) {
    for (const ByteEdit& e : patch.edits) {
        bool inside = false;
        for (std::size_t l = 0; l < layout.layers.size(); ++l) {
            const LayerRecord& rec = layout.layers[l];
            if (e.offset < rec.weights_offset || e.offset >= rec.weights_offset + rec.weights_size()) {
                continue;
            }
            if ((e.offset - rec.weights_offset) % 4 != 0) {
                throw ConfigError("edit at offset " + std::to_string(e.offset) +
                                  " is not aligned to a weight cell");
            }
            if (patch.target_layer && *patch.target_layer != l) {
                throw ConfigError("edit at offset " + std::to_string(e.offset) + " falls in layer " +
                                  std::to_string(l) + ", patch targets layer " +
                                  std::to_string(*patch.target_layer));
            }
            inside = true;
            break;
        }
        if (!inside) {
            throw ConfigError("edit at offset " + std::to_string(e.offset) +
                              " is outside every weight region");
        }
    }
}

std::string mismatch_message(const ByteEdit& e) {
    return "bytes at offset " + std::to_string(e.offset) +
           " do not match the patch; the file is not in the declared from-state";
}

}  // namespace

PatchReport apply_patch_bytes(std::span<std::uint8_t> bytes, const WeightPatch& patch) {
    validate(patch);
    const ModelLayout layout = parse_layout(bytes, bytes.size());
    check_targets(patch, layout);
    PatchReport report;
    for (const ByteEdit& e : patch.edits) {
        report.bytes_read += 4;
        if (!std::equal(e.before.begin(), e.before.end(), bytes.begin() + static_cast<std::ptrdiff_t>(e.offset))) {
            throw PatchMismatchError(e.offset, mismatch_message(e));
        }
    }
    for (const ByteEdit& e : patch.edits) {
        std::copy(e.after.begin(), e.after.end(), bytes.begin() + static_cast<std::ptrdiff_t>(e.offset));
        report.bytes_written += 4;
        ++report.edits_applied;
    }
    return report;
}

PatchReport apply_patch_file(const std::filesystem::path& path, const WeightPatch& patch) {
    validate(patch);
    const ModelLayout layout = load_layout(path);
    check_targets(patch, layout);

    std::fstream file(path, std::ios::in | std::ios::out | std::ios::binary);
    if (!file) throw IoError("cannot open " + path.string() + " for update");

    PatchReport report;
    for (const ByteEdit& e : patch.edits) {
        Word current{};
        file.seekg(static_cast<std::streamoff>(e.offset));
        file.read(reinterpret_cast<char*>(current.data()), 4);
        if (file.gcount() != 4) throw IoError("short read at offset " + std::to_string(e.offset));
        report.bytes_read += 4;
        if (current != e.before) throw PatchMismatchError(e.offset, mismatch_message(e));
    }
    for (const ByteEdit& e : patch.edits) {
        file.seekp(static_cast<std::streamoff>(e.offset));
        file.write(reinterpret_cast<const char*>(e.after.data()), 4);
        if (!file) throw IoError("write failed at offset " + std::to_string(e.offset));
        report.bytes_written += 4;
        ++report.edits_applied;
    }
    file.flush();
    if (!file) throw IoError("flush failed for " + path.string());
    return report;
}

std::vector<CellEdit> to_cell_edits(const WeightPatch& patch, const ModelLayout& layout) {
    validate(patch);
    check_targets(patch, layout);
    std::vector<CellEdit> cells;
    cells.reserve(patch.edits.size());
    for (const ByteEdit& e : patch.edits) {
        for (std::size_t l = 0; l < layout.layers.size(); ++l) {
            const LayerRecord& rec = layout.layers[l];
            if (e.offset < rec.weights_offset || e.offset >= rec.weights_offset + rec.weights_size()) {
                continue;
            }
            const std::uint64_t cell = (e.offset - rec.weights_offset) / 4;
            cells.push_back({l, static_cast<std::size_t>(cell / rec.out_dim),
                             static_cast<std::size_t>(cell % rec.out_dim), decode_word(e.after)});
            break;
        }
    }
    return cells;
}

Model apply_patch_memory(const Model& model, std::span<const CellEdit> edits) {
    for (const CellEdit& e : edits) {
        if (e.layer >= model.layers.size()) {
            throw DimensionError("cell edit names layer " + std::to_string(e.layer) + " of " +
                                 std::to_string(model.layers.size()));
        }
        const Matrix& w = model.layers[e.layer].weights;
        if (e.row >= w.rows() || e.col >= w.cols()) {
            throw DimensionError("cell edit (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                 ") outside layer " + std::to_string(e.layer));
        }
        if (!std::isfinite(e.value)) throw ConfigError("cell edit writes a non-finite value");
    }
    Model out = model;
    for (const CellEdit& e : edits) out.layers[e.layer].weights(e.row, e.col) = e.value;
    return out;
}

namespace {

constexpr std::string_view kPatchHeader = "NTPATCH 1";

std::string hex_word(const Word& w) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%02x%02x%02x%02x", w[0], w[1], w[2], w[3]);
    return buf;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::uint64_t parse_hex(std::string_view field, std::size_t width, std::string_view what,
                        std::size_t line) {
    if (field.size() % 2 != 0) {
        throw ParseError(ParseErrorCode::BadText,
                         "line " + std::to_string(line) + ": " + std::string(what) + " has odd-length hex",
                         line);
    }
    if (field.size() != width) {
        throw ParseError(ParseErrorCode::BadText,
                         "line " + std::to_string(line) + ": " + std::string(what) + " must be " +
                             std::to_string(width) + " hex digits",
                         line);
    }
    std::uint64_t v = 0;
    for (char c : field) {
        const int d = hex_digit(c);
        if (d < 0) {
            throw ParseError(ParseErrorCode::BadText,
                             "line " + std::to_string(line) + ": " + std::string(what) +
                                 " is not lowercase hex",
                             line);
        }
        v = v << 4 | static_cast<std::uint64_t>(d);
    }
    return v;
}

Word word_from_hex(std::uint64_t v) {
    return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
            static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

}  // namespace

std::string export_patch(const WeightPatch& patch) {
    validate(patch);
    std::string out(kPatchHeader);
    out += '\n';
    char offset[17];
    for (const ByteEdit& e : patch.edits) {
        std::snprintf(offset, sizeof offset, "%016llx", static_cast<unsigned long long>(e.offset));
        out += offset;
        out += ' ';
        out += hex_word(e.before);
        out += ' ';
        out += hex_word(e.after);
        out += '\n';
    }
    return out;
}

WeightPatch import_patch(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    if (lines.empty() || lines[0] != kPatchHeader) {
        throw ParseError(ParseErrorCode::BadText, "line 1: expected \"NTPATCH 1\"", 1);
    }
    WeightPatch patch;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string_view line = lines[i];
        std::vector<std::string_view> fields;
        std::size_t at = 0;
        while (at <= line.size()) {
            const std::size_t sp = line.find(' ', at);
            fields.push_back(line.substr(at, sp == std::string_view::npos ? std::string_view::npos : sp - at));
            if (sp == std::string_view::npos) break;
            at = sp + 1;
        }
        if (fields.size() != 3) {
            throw ParseError(ParseErrorCode::BadText,
                             "line " + std::to_string(line_no) + ": expected 3 space-separated fields",
                             line_no);
        }
        ByteEdit e;
        e.offset = parse_hex(fields[0], 16, "offset", line_no);
        e.before = word_from_hex(parse_hex(fields[1], 8, "before", line_no));
        e.after = word_from_hex(parse_hex(fields[2], 8, "after", line_no));
        if (e.before == e.after) {
            throw ParseError(ParseErrorCode::BadText,
                             "line " + std::to_string(line_no) + ": before equals after", line_no);
        }
        if (!patch.edits.empty() && e.offset < patch.edits.back().offset + 4) {
            throw ParseError(ParseErrorCode::BadText,
                             "line " + std::to_string(line_no) + ": offset out of order or overlapping",
                             line_no);
        }
        patch.edits.push_back(e);
    }
    return patch;
}

WeightPatch load_patch(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return import_patch(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void save_patch(const WeightPatch& patch, const std::filesystem::path& path) {
    const std::string text = export_patch(patch);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace ntrojan
