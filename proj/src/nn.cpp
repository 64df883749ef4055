#include "ntrojan/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bytes.hpp"
#include "ntrojan/errors.hpp"
#include "ntrojan/model_format.hpp"
#include "random.hpp"

namespace ntrojan {

Vector forward(const Model& model, std::span<const float> x) {
    if (model.layers.empty()) throw DimensionError("forward through an empty model");
    if (x.size() != model.input_dim()) {
        throw DimensionError("input of length " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(model.input_dim()));
    }
    Vector act(x.begin(), x.end());
    for (const Layer& layer : model.layers) {
        Vector z = row_vec_mat_mul(act, layer.weights);
        if (layer.bias) {
            for (std::size_t k = 0; k < z.size(); ++k) z[k] += (*layer.bias)[k];
        }
        switch (layer.activation) {
            case Activation::Linear: act = std::move(z); break;
            case Activation::Relu: act = relu(z); break;
            case Activation::Softmax: act = softmax(z); break;
        }
    }
    return act;
}

Prediction predict_detail(const Model& model, std::span<const float> x) {
    const Vector y = forward(model, x);
    Prediction p;
    p.label = argmax(y);
    p.confidence = y[p.label];
    p.unique = unique_max(y);
    return p;
}

std::size_t predict(const Model& model, std::span<const float> x) {
    return argmax(forward(model, x));
}

Vector blob_center(std::uint32_t c, std::uint32_t dim) {
    Vector center(dim, 0.0f);
    center[c % dim] += 1.0f;
    center[(c + 1) % dim] += static_cast<float>(c / dim);
    return center;
}

Dataset gen_blobs(std::uint64_t seed, std::uint32_t n_classes, std::uint32_t dim,
                  std::uint32_t per_class, float spread) {
    if (n_classes < 2) throw ConfigError("gen_blobs needs at least 2 classes");
    if (per_class < 1) throw ConfigError("gen_blobs needs at least 1 sample per class");
    if (dim < 1) throw ConfigError("gen_blobs needs dim >= 1");
    if (!std::isfinite(spread) || spread < 0.0f) throw ConfigError("spread must be finite and >= 0");

    detail::Rng rng(seed);
    Dataset data;
    data.n_classes = n_classes;
    data.dim = dim;
    data.seed = seed;
    data.samples.reserve(std::size_t{n_classes} * per_class);
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        const Vector center = blob_center(c, dim);
        for (std::uint32_t k = 0; k < per_class; ++k) {
            Sample s;
            s.label = c;
            s.features.resize(dim);
            for (std::uint32_t j = 0; j < dim; ++j) {
                s.features[j] = center[j] + spread * static_cast<float>(rng.normal());
            }
            data.samples.push_back(std::move(s));
        }
    }
    for (std::size_t i = data.samples.size(); i > 1; --i) {
        std::swap(data.samples[i - 1], data.samples[rng.index(i)]);
    }
    return data;
}

Model init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t n_classes,
               std::uint64_t seed) {
    if (input_dim == 0 || hidden_dim == 0 || n_classes < 2) {
        throw ConfigError("init_mlp needs positive dimensions and at least 2 classes");
    }
    detail::Rng rng(seed);
    auto draw = [&](std::size_t rows, std::size_t cols, double scale) {
        Matrix m(rows, cols);
        for (float& w : m.cells()) w = static_cast<float>(scale * rng.normal());
        return m;
    };
    Model model;
    model.layers.push_back({draw(input_dim, hidden_dim, std::sqrt(2.0 / input_dim)),
                            Vector(hidden_dim, 0.0f), Activation::Relu});
    model.layers.push_back({draw(hidden_dim, n_classes, std::sqrt(1.0 / hidden_dim)),
                            Vector(n_classes, 0.0f), Activation::Softmax});
    return model;
}

namespace {

void check_mlp(const Model& mlp, const Dataset& data) {
    validate(mlp);
    if (mlp.layers.size() != 2 || !mlp.layers[0].bias || !mlp.layers[1].bias ||
        mlp.layers[0].activation != Activation::Relu ||
        mlp.layers[1].activation != Activation::Softmax) {
        throw ConfigError("expected a Dense(relu) -> Dense(softmax) model with biases");
    }
    if (mlp.input_dim() != data.dim || mlp.output_dim() != data.n_classes) {
        throw DimensionError("model and dataset dimensions differ");
    }
    if (data.samples.empty()) throw ConfigError("empty dataset");
}

void check_dataset(const Dataset& data) {
    if (data.n_classes < 2 || data.dim == 0) throw ConfigError("dataset needs >= 2 classes and dim >= 1");
    for (const Sample& s : data.samples) {
        if (s.features.size() != data.dim) throw DimensionError("sample dimension differs from dataset dim");
        if (s.label >= data.n_classes) throw ConfigError("label out of range");
        if (!all_finite(s.features)) throw ConfigError("non-finite feature");
    }
}

}  // namespace

LossGradient loss_and_gradient(const Model& mlp, const Dataset& data) {
    check_mlp(mlp, data);
    const Layer& l1 = mlp.layers[0];
    const Layer& l2 = mlp.layers[1];
    const std::size_t d = l1.in_dim();
    const std::size_t h = l1.out_dim();
    const std::size_t n = l2.out_dim();
    const double inv_count = 1.0 / static_cast<double>(data.samples.size());

    LossGradient g;
    g.weights = {Matrix(d, h), Matrix(h, n)};
    g.bias = {Vector(h, 0.0f), Vector(n, 0.0f)};
    std::vector<double> gw1(d * h, 0.0), gb1(h, 0.0), gw2(h * n, 0.0), gb2(n, 0.0);
    std::vector<double> hidden(h), logits(n), dlogits(n), dhidden(h);

    for (const Sample& s : data.samples) {
        for (std::size_t j = 0; j < h; ++j) {
            double z = (*l1.bias)[j];
            for (std::size_t i = 0; i < d; ++i) z += double{s.features[i]} * l1.weights(i, j);
            hidden[j] = z > 0.0 ? z : 0.0;
        }
        double top = -HUGE_VAL;
        for (std::size_t k = 0; k < n; ++k) {
            double z = (*l2.bias)[k];
            for (std::size_t j = 0; j < h; ++j) z += hidden[j] * l2.weights(j, k);
            logits[k] = z;
            top = std::max(top, z);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) total += std::exp(logits[k] - top);
        const double log_norm = top + std::log(total);
        g.loss += (log_norm - logits[s.label]) * inv_count;

        for (std::size_t k = 0; k < n; ++k) {
            dlogits[k] = (std::exp(logits[k] - log_norm) - (k == s.label ? 1.0 : 0.0)) * inv_count;
            gb2[k] += dlogits[k];
        }
        for (std::size_t j = 0; j < h; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                gw2[j * n + k] += hidden[j] * dlogits[k];
                acc += dlogits[k] * l2.weights(j, k);
            }
            dhidden[j] = hidden[j] > 0.0 ? acc : 0.0;
            gb1[j] += dhidden[j];
        }
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = s.features[i];
            for (std::size_t j = 0; j < h; ++j) gw1[i * h + j] += xi * dhidden[j];
        }
    }

    auto narrow = [](const std::vector<double>& src, std::span<float> dst) {
        std::transform(src.begin(), src.end(), dst.begin(), [](double v) { return static_cast<float>(v); });
    };
    narrow(gw1, g.weights[0].cells());
    narrow(gw2, g.weights[1].cells());
    narrow(gb1, g.bias[0]);
    narrow(gb2, g.bias[1]);
    return g;
}

double accuracy(const Model& model, const Dataset& data) {
    if (data.samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const Sample& s : data.samples) hits += predict(model, s.features) == s.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.samples.size());
}

TrainResult train_mlp(const Dataset& train, const TrainOptions& options) {
    check_dataset(train);
    if (!std::isfinite(options.learning_rate) || options.learning_rate < 0.0f) {
        throw ConfigError("learning rate must be finite and >= 0");
    }
    TrainResult result;
    result.model = init_mlp(train.dim, options.hidden_dim, train.n_classes, options.seed);
    check_mlp(result.model, train);

    const float lr = options.learning_rate;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const LossGradient g = loss_and_gradient(result.model, train);
        if (!std::isfinite(g.loss)) {
            throw TrainingError("loss became non-finite at epoch " + std::to_string(epoch));
        }
        for (std::size_t l = 0; l < 2; ++l) {
            Layer& layer = result.model.layers[l];
            auto w = layer.weights.cells();
            const auto gw = g.weights[l].cells();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
            Vector& b = *layer.bias;
            for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * g.bias[l][i];
        }
        if (!result.model.layers[0].weights.all_finite() || !result.model.layers[1].weights.all_finite()) {
            throw TrainingError("weights became non-finite at epoch " + std::to_string(epoch));
        }
    }
    const double final_loss = loss_and_gradient(result.model, train).loss;
    if (!std::isfinite(final_loss)) throw TrainingError("final loss is non-finite");
    result.final_loss = final_loss;
    result.train_accuracy = accuracy(result.model, train);
    return result;
}

namespace {
constexpr std::array<std::uint8_t, 4> kDatasetMagic = {'N', 'T', 'D', 'S'};
constexpr std::size_t kDatasetHeaderSize = 16;
}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& data) {
    check_dataset(data);
    std::vector<std::uint8_t> out;
    out.reserve(kDatasetHeaderSize + data.samples.size() * (4 * data.dim + 4));
    detail::ByteWriter w(out);
    w.bytes(kDatasetMagic);
    w.u32(data.n_classes);
    w.u32(data.dim);
    w.u32(static_cast<std::uint32_t>(data.samples.size()));
    for (const Sample& s : data.samples) {
        for (float x : s.features) w.f32(x);
        w.u32(s.label);
    }
    return out;
}

Dataset parse_dataset(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kDatasetHeaderSize) {
        throw ParseError(ParseErrorCode::Truncated, "dataset shorter than its 16-byte header");
    }
    if (!std::equal(kDatasetMagic.begin(), kDatasetMagic.end(), bytes.begin())) {
        throw ParseError(ParseErrorCode::BadMagic, "expected \"NTDS\"");
    }
    Dataset data;
    data.n_classes = detail::load_u32(bytes, 4);
    data.dim = detail::load_u32(bytes, 8);
    const std::uint64_t count = detail::load_u32(bytes, 12);
    if (data.n_classes < 2 || data.dim == 0) {
        throw ParseError(ParseErrorCode::BadRecord, "dataset needs >= 2 classes and dim >= 1");
    }
    const std::uint64_t record = 4ull * data.dim + 4;
    if ((bytes.size() - kDatasetHeaderSize) / record < count) {
        throw ParseError(ParseErrorCode::Truncated, "dataset declares " + std::to_string(count) + " samples");
    }
    if (kDatasetHeaderSize + count * record != bytes.size()) {
        throw ParseError(ParseErrorCode::NonCanonicalLayout, "trailing bytes after the last sample");
    }
    data.samples.resize(count);
    std::size_t at = kDatasetHeaderSize;
    for (std::size_t i = 0; i < count; ++i) {
        Sample& s = data.samples[i];
        s.features.resize(data.dim);
        for (std::uint32_t j = 0; j < data.dim; ++j, at += 4) s.features[j] = detail::load_f32(bytes, at);
        s.label = detail::load_u32(bytes, at);
        at += 4;
        if (s.label >= data.n_classes) {
            throw ParseError(ParseErrorCode::BadRecord, "sample " + std::to_string(i) + " label out of range");
        }
        if (!all_finite(s.features)) {
            throw ParseError(ParseErrorCode::NonFiniteValue, "sample " + std::to_string(i));
        }
    }
    return data;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    write_file(path, serialize_dataset(data));
}

}  // namespace ntrojan
