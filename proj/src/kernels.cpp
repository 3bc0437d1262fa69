#include "pcn/kernels.hpp"

#include "pcn/errors.hpp"

namespace pcn::kernels {

Matrix prediction(const PCNetwork& net, const std::vector<Matrix>& values, std::size_t l) {
    return matmul(net.weights[l], apply(net.activation, values[l + 1]));
}

Matrix error(const PCNetwork& net, const std::vector<Matrix>& values, std::size_t l) {
    if (l == net.depth()) return Matrix(values[l].rows(), values[l].cols());
    return subtract(values[l], prediction(net, values, l));
}

Matrix value_update(const PCNetwork& net, const std::vector<Matrix>& values,
                    const std::vector<Matrix>& errors, std::size_t l, double gamma) {
    const Matrix back = matmul_tn(net.weights[l - 1], errors[l - 1]);
    const Matrix fprime = derivative(net.activation, values[l]);
    Matrix next = values[l];
    auto x = next.data();
    auto e = errors[l].data();
    auto b = back.data();
    auto d = fprime.data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += gamma * (-e[i] + d[i] * b[i]);
    require_finite(next, "value update", static_cast<long>(l));
    return next;
}

Matrix weight_update(const PCNetwork& net, const std::vector<Matrix>& values,
                     const std::vector<Matrix>& errors, std::size_t l, double alpha,
                     double weight_decay) {
    const double batch = static_cast<double>(errors[l].cols());
    const Matrix grad = matmul_nt(errors[l], apply(net.activation, values[l + 1]));
    Matrix next = net.weights[l];
    auto w = next.data();
    auto g = grad.data();
    const double keep = 1.0 - alpha * weight_decay;
    const double rate = alpha / batch;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = w[i] * keep + rate * g[i];
    require_finite(next, "weight update", static_cast<long>(l));
    return next;
}

std::vector<Matrix> shape_like(const std::vector<Matrix>& m) {
    std::vector<Matrix> shapes;
    shapes.reserve(m.size());
    for (const auto& x : m) shapes.emplace_back(x.rows(), x.cols());
    return shapes;
}

}  // namespace pcn::kernels
