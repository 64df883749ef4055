#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntrojan/model.hpp"
#include "ntrojan/trojan.hpp"

namespace ntrojan {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct LayerDigest {
    std::size_t index = 0;
    std::string digest;

    friend bool operator==(const LayerDigest&, const LayerDigest&) = default;
};

/// Digests of a model file: one over the header and layer table, one per
/// layer over its weight bytes followed by its bias bytes.
struct IntegrityManifest {
    std::string algorithm = "sha256";
    std::string structure_digest;
    std::vector<LayerDigest> layers;
    // Informational; not part of the text form.
    std::chrono::system_clock::time_point created_at{};
    std::string model_path;

    bool same_digests(const IntegrityManifest& other) const {
        return algorithm == other.algorithm && structure_digest == other.structure_digest &&
               layers == other.layers;
    }
};

IntegrityManifest manifest_of_bytes(std::span<const std::uint8_t> model_bytes);
IntegrityManifest manifest_create(const std::filesystem::path& model_path);

struct LayerCheck {
    std::size_t index = 0;
    bool match = false;
};

struct VerifyReport {
    bool readable = true;   // false when the file is missing or its layout is corrupt
    std::string error;
    bool structure_match = false;
    std::vector<LayerCheck> layers;  // union of layers in the file and the manifest

    bool clean() const;
    std::vector<std::size_t> flagged_layers() const;
};

VerifyReport manifest_verify_bytes(std::span<const std::uint8_t> model_bytes,
                                   const IntegrityManifest& manifest);

/// Never throws for a missing or corrupt model; that is reported instead.
VerifyReport manifest_verify(const std::filesystem::path& model_path, const IntegrityManifest& manifest);

/// "NTMAN 1 sha256", "structure <hex>", then "layer <idx> <hex>" per layer.
std::string export_manifest(const IntegrityManifest& manifest);
IntegrityManifest import_manifest(std::string_view text);
IntegrityManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const IntegrityManifest& manifest, const std::filesystem::path& path);

enum class Verdict { IdentityPassThrough, ModifiedIdentity };

std::string_view to_string(Verdict v);

struct TrojanFinding {
    std::size_t layer = 0;
    Verdict verdict = Verdict::IdentityPassThrough;
    MatrixMatch match;  // recovered mode (and class pair, unless Benign)
};

/// Flags every square, bias-free, linear dense layer whose weights are a
/// trojan mode matrix within `tolerance`.
std::vector<TrojanFinding> scan_model(const Model& model, float tolerance = kDefaultTolerance);

}  // namespace ntrojan
