#include "ntrojan/sentinel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <sstream>

#include "ntrojan/errors.hpp"
#include "ntrojan/model_format.hpp"

namespace ntrojan {

namespace {

constexpr std::string_view kManifestHeader = "NTMAN 1 sha256";

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error("SHA-256 initialisation failed");
        }
    }

    void update(std::span<const std::uint8_t> bytes) {
        if (EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()) != 1) {
            throw Error("SHA-256 update failed");
        }
    }

    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("SHA-256 final failed");
        std::string out;
        out.reserve(2 * len);
        char buf[3];
        for (unsigned int i = 0; i < len; ++i) {
            std::snprintf(buf, sizeof buf, "%02x", md[i]);
            out += buf;
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

std::string layer_digest(std::span<const std::uint8_t> bytes, const LayerRecord& rec) {
    Sha256 h;
    h.update(bytes.subspan(rec.weights_offset, rec.weights_size()));
    if (rec.has_bias()) h.update(bytes.subspan(rec.bias_offset, rec.bias_size()));
    return h.hex();
}

IntegrityManifest digests_of(std::span<const std::uint8_t> bytes, const ModelLayout& layout) {
    IntegrityManifest m;
    m.structure_digest = sha256_hex(bytes.first(layout.structure_size()));
    for (std::size_t i = 0; i < layout.layers.size(); ++i) {
        m.layers.push_back({i, layer_digest(bytes, layout.layers[i])});
    }
    return m;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex();
}

IntegrityManifest manifest_of_bytes(std::span<const std::uint8_t> model_bytes) {
    parse(model_bytes);  // full validation, weights included
    return digests_of(model_bytes, parse_layout(model_bytes, model_bytes.size()));
}

IntegrityManifest manifest_create(const std::filesystem::path& model_path) {
    IntegrityManifest m = manifest_of_bytes(read_file(model_path));
    m.created_at = std::chrono::system_clock::now();
    m.model_path = model_path.string();
    return m;
}

bool VerifyReport::clean() const {
    return readable && structure_match &&
           std::all_of(layers.begin(), layers.end(), [](const LayerCheck& c) { return c.match; });
}

std::vector<std::size_t> VerifyReport::flagged_layers() const {
    std::vector<std::size_t> out;
    for (const LayerCheck& c : layers) {
        if (!c.match) out.push_back(c.index);
    }
    return out;
}

VerifyReport manifest_verify_bytes(std::span<const std::uint8_t> model_bytes,
                                   const IntegrityManifest& manifest) {
    VerifyReport report;
    ModelLayout layout;
    try {
        // Layout only: a tampered weight may no longer be a finite float, and
        // that must still be attributed to its layer rather than fail the parse.
        layout = parse_layout(model_bytes, model_bytes.size());
    } catch (const ParseError& e) {
        report.readable = false;
        report.error = e.what();
        return report;
    }
    const IntegrityManifest actual = digests_of(model_bytes, layout);
    report.structure_match = actual.structure_digest == manifest.structure_digest;

    const std::size_t count = std::max(actual.layers.size(), manifest.layers.size());
    for (std::size_t i = 0; i < count; ++i) {
        LayerCheck check{i, false};
        const auto expected = std::find_if(manifest.layers.begin(), manifest.layers.end(),
                                           [i](const LayerDigest& d) { return d.index == i; });
        if (i < actual.layers.size() && expected != manifest.layers.end()) {
            check.match = actual.layers[i].digest == expected->digest;
        }
        report.layers.push_back(check);
    }
    return report;
}

VerifyReport manifest_verify(const std::filesystem::path& model_path, const IntegrityManifest& manifest) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(model_path);
    } catch (const IoError& e) {
        VerifyReport report;
        report.readable = false;
        report.error = e.what();
        return report;
    }
    return manifest_verify_bytes(bytes, manifest);
}

std::string export_manifest(const IntegrityManifest& manifest) {
    std::ostringstream out;
    out << kManifestHeader << '\n';
    out << "structure " << manifest.structure_digest << '\n';
    for (const LayerDigest& d : manifest.layers) out << "layer " << d.index << ' ' << d.digest << '\n';
    return out.str();
}

namespace {

bool is_digest(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

IntegrityManifest import_manifest(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError(ParseErrorCode::BadText, "manifest line " + std::to_string(line_no) + ": " + what,
                         line_no);
    };

    IntegrityManifest m;
    if (!std::getline(in, line) || (++line_no, line != kManifestHeader)) {
        line_no = 1;
        fail("expected \"NTMAN 1 sha256\"");
    }
    bool have_structure = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string tag, a, b, extra;
        fields >> tag >> a;
        if (tag == "structure") {
            if (have_structure) fail("duplicate structure line");
            if (!is_digest(a) || (fields >> extra)) fail("expected \"structure <64 hex>\"");
            m.structure_digest = a;
            have_structure = true;
        } else if (tag == "layer") {
            fields >> b;
            if (a.empty() || a.size() > 9 ||
                !std::all_of(a.begin(), a.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
                !is_digest(b) || (fields >> extra)) {
                fail("expected \"layer <index> <64 hex>\"");
            }
            const std::size_t index = std::stoul(a);
            if (index != m.layers.size()) fail("layer indices must run 0, 1, 2, ...");
            m.layers.push_back({index, b});
        } else {
            fail("unknown line \"" + line + "\"");
        }
    }
    if (!have_structure) {
        ++line_no;
        fail("missing structure line");
    }
    return m;
}

IntegrityManifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return import_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void save_manifest(const IntegrityManifest& manifest, const std::filesystem::path& path) {
    const std::string text = export_manifest(manifest);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::IdentityPassThrough: return "IdentityPassThrough";
        case Verdict::ModifiedIdentity: return "ModifiedIdentity";
    }
    return "Unknown";
}

std::vector<TrojanFinding> scan_model(const Model& model, float tolerance) {
    std::vector<TrojanFinding> findings;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        if (!layer.weights.square() || layer.bias || layer.activation != Activation::Linear) continue;
        const auto match = classify_matrix(layer.weights, tolerance);
        if (!match) continue;
        findings.push_back({i,
                            match->mode == Mode::Benign ? Verdict::IdentityPassThrough
                                                        : Verdict::ModifiedIdentity,
                            *match});
    }
    return findings;
}

}  // namespace ntrojan
