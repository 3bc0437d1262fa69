#include "pcn/activation.hpp"

#include <cmath>

#include "pcn/errors.hpp"

namespace pcn {

double activate(Activation kind, double x) noexcept {
    switch (kind) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

double activate_derivative(Activation kind, double x) noexcept {
    switch (kind) {
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

Matrix apply(Activation kind, const Matrix& x) {
    if (kind == Activation::Identity) return x;
    Matrix y(x.rows(), x.cols());
    auto in = x.data();
    auto out = y.data();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = activate(kind, in[i]);
    return y;
}

Matrix derivative(Activation kind, const Matrix& x) {
    Matrix y(x.rows(), x.cols(), 1.0);
    if (kind == Activation::Identity) return y;
    auto in = x.data();
    auto out = y.data();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = activate_derivative(kind, in[i]);
    return y;
}

std::string to_string(Activation kind) {
    switch (kind) {
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::ReLU;
    if (name == "identity" || name == "linear") return Activation::Identity;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

}  // namespace pcn
