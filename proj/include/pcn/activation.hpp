#pragma once

#include <string>
#include <string_view>

#include "pcn/matrix.hpp"

namespace pcn {

enum class Activation { Tanh, ReLU, Identity };

double activate(Activation kind, double x) noexcept;
// Analytic derivative; ReLU'(0) is 0.
double activate_derivative(Activation kind, double x) noexcept;

Matrix apply(Activation kind, const Matrix& x);
Matrix derivative(Activation kind, const Matrix& x);

std::string to_string(Activation kind);
// Accepts "tanh", "relu", "identity" (also "linear").
Activation parse_activation(std::string_view name);

}  // namespace pcn
