#include "ntrojan/model.hpp"

#include <string>

#include "ntrojan/errors.hpp"

namespace ntrojan {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Softmax: return "softmax";
    }
    return "unknown";
}

void validate(const Model& model) {
    if (model.layers.empty()) throw DimensionError("model has no layers");
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        if (layer.in_dim() == 0 || layer.out_dim() == 0) {
            throw DimensionError("layer " + std::to_string(i) + " has a zero dimension");
        }
        if (layer.bias && layer.bias->size() != layer.out_dim()) {
            throw DimensionError("layer " + std::to_string(i) + " bias length " +
                                 std::to_string(layer.bias->size()) + " != out_dim " +
                                 std::to_string(layer.out_dim()));
        }
        if (i > 0 && model.layers[i - 1].out_dim() != layer.in_dim()) {
            throw DimensionError("layer " + std::to_string(i - 1) + " out_dim " +
                                 std::to_string(model.layers[i - 1].out_dim()) + " != layer " +
                                 std::to_string(i) + " in_dim " + std::to_string(layer.in_dim()));
        }
    }
}

}  // namespace ntrojan
