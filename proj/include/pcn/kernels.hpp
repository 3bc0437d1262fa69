#pragma once

// Per-layer building blocks shared by the serial and layer-parallel engines.
// Each reads only the snapshot it is handed and returns one layer's successor.

#include <cstddef>
#include <vector>

#include "pcn/network.hpp"

namespace pcn::kernels {

// weights[l] · f(x[l+1]); one propagation product.
Matrix prediction(const PCNetwork& net, const std::vector<Matrix>& values, std::size_t l);

// x[l] - mu[l] for l < L; zeros for l == L.
Matrix error(const PCNetwork& net, const std::vector<Matrix>& values, std::size_t l);

// x[l] + gamma · (-e[l] + f'(x[l]) * (weights[l-1]ᵀ · e[l-1])) for l >= 1.
Matrix value_update(const PCNetwork& net, const std::vector<Matrix>& values,
                    const std::vector<Matrix>& errors, std::size_t l, double gamma);

// weights[l] · (1 - alpha·decay) + (alpha / B) · e[l] · f(x[l+1])ᵀ.
Matrix weight_update(const PCNetwork& net, const std::vector<Matrix>& values,
                     const std::vector<Matrix>& errors, std::size_t l, double alpha,
                     double weight_decay);

// Shapes of successor slots, used for slot preparation.
std::vector<Matrix> shape_like(const std::vector<Matrix>& m);

}  // namespace pcn::kernels
