#include <gtest/gtest.h>

#include <sstream>

#include "pcn/errors.hpp"
#include "pcn/kernels.hpp"
#include "pcn/network.hpp"
#include "test_support.hpp"

namespace pcn {
namespace {

using test::random_matrix;

PCNetwork scalar_chain() {
    // dims {1, 1, 1}: x0 <- 2·f(x1), x1 <- -1·f(x2), identity f.
    PCNetwork net;
    net.dims = {1, 1, 1};
    net.activation = Activation::Identity;
    net.weights = {Matrix{{2.0}}, Matrix{{-1.0}}};
    return net;
}

NetworkState scalar_state(double x0, double x1, double x2) {
    NetworkState s;
    s.values = {Matrix{{x0}}, Matrix{{x1}}, Matrix{{x2}}};
    s.errors = {Matrix(1, 1), Matrix(1, 1), Matrix(1, 1)};
    s.clamped = {true, false, true};
    return s;
}

TEST(Energy, HandComputedScalarChain) {
    const auto net = scalar_chain();
    const auto s = compute_errors(net, scalar_state(5.0, 3.0, 4.0));
    // mu0 = 6, e0 = -1; mu1 = -4, e1 = 7; e2 = 0.
    EXPECT_DOUBLE_EQ(s.errors[0](0, 0), -1.0);
    EXPECT_DOUBLE_EQ(s.errors[1](0, 0), 7.0);
    EXPECT_DOUBLE_EQ(s.errors[2](0, 0), 0.0);
    EXPECT_DOUBLE_EQ(energy(s), 0.5 * (1.0 + 49.0));
}

TEST(Energy, TopLayerErrorIsAlwaysZero) {
    Rng rng(1);
    const auto net = PCNetwork::random({3, 4, 5}, Activation::Tanh, rng);
    const auto s = test::random_state(net, 6, rng);
    EXPECT_EQ(sum_squares(s.errors[2]), 0.0);
}

TEST(FeedforwardInit, AllErrorsZeroAndMatchesForward) {
    Rng rng(2);
    const auto net = PCNetwork::random({2, 5, 4, 3}, Activation::Tanh, rng);
    const Matrix top = random_matrix(3, 7, rng);
    const auto s = compute_errors(net, feedforward_init(net, top));
    EXPECT_EQ(energy(s), 0.0);
    EXPECT_EQ(s.values[0], forward(net, top));
}

TEST(Clamp, SupervisedWithoutLabelsIsUsageError) {
    Rng rng(3);
    const auto net = PCNetwork::random({2, 3}, Activation::Tanh, rng);
    const auto s = feedforward_init(net, random_matrix(3, 2, rng));
    EXPECT_THROW(clamp(s, Mode::Supervised, random_matrix(3, 2, rng)), UsageError);
    EXPECT_THROW(clamp(s, Mode::Generative, random_matrix(3, 2, rng)), ShapeError);
    const auto g = clamp(s, Mode::Generative, random_matrix(2, 2, rng));
    EXPECT_EQ(g.clamped, (std::vector<bool>{true, false}));
}

TEST(Network, ValidateRejectsBadShapes) {
    PCNetwork net;
    net.dims = {2, 3};
    net.weights = {Matrix(3, 2)};
    EXPECT_THROW(net.validate(), ShapeError);
    net.dims = {4};
    net.weights.clear();
    EXPECT_THROW(net.validate(), ShapeError);
}

// -dF/dx[l] and -dF/dθ[l] from central differences of the energy.
TEST(Gradient, InferenceAndWeightKernelsFollowNegativeEnergyGradient) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto net = PCNetwork::random({3, 4, 5, 2}, trial % 2 ? Activation::Tanh : Activation::Identity, rng);
        const auto s = test::random_state(net, 2, rng);
        const double h = 1e-5;
        for (std::size_t l = 1; l < 3; ++l) {
            const Matrix step = subtract(kernels::value_update(net, s.values, s.errors, l, 1.0), s.values[l]);
            for (std::size_t i = 0; i < s.values[l].size(); ++i) {
                auto plus = s, minus = s;
                plus.values[l].data()[i] += h;
                minus.values[l].data()[i] -= h;
                const double fd = -(energy(net, plus) - energy(net, minus)) / (2 * h);
                EXPECT_NEAR(step.data()[i], fd, 1e-7 * std::max(1.0, std::abs(fd)));
            }
        }
        for (std::size_t l = 0; l < 3; ++l) {
            const double alpha = 1.0;
            const Matrix step = scale(subtract(kernels::weight_update(net, s.values, s.errors, l, alpha, 0.0),
                                               net.weights[l]),
                                      static_cast<double>(s.batch()));
            for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
                auto plus = net, minus = net;
                plus.weights[l].data()[i] += h;
                minus.weights[l].data()[i] -= h;
                const double fd = -(energy(plus, s) - energy(minus, s)) / (2 * h);
                EXPECT_NEAR(step.data()[i], fd, 1e-7 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST(Kernels, WeightDecayShrinksTowardZero) {
    Rng rng(5);
    const auto net = PCNetwork::random({2, 3}, Activation::Tanh, rng);
    auto s = test::random_state(net, 1, rng);
    for (auto& e : s.errors) e = Matrix(e.rows(), e.cols());
    const Matrix w = kernels::weight_update(net, s.values, s.errors, 0, 0.1, 0.5);
    EXPECT_EQ(w, scale(net.weights[0], 1.0 - 0.1 * 0.5));
}

TEST(Checkpoint, RoundTripIsExact) {
    Rng rng(6);
    const auto net = PCNetwork::random({10, 7, 784}, Activation::ReLU, rng);
    std::stringstream buf;
    save_network(net, buf);
    EXPECT_EQ(load_network(buf), net);
}

TEST(Checkpoint, CorruptInputsAreParseErrors) {
    Rng rng(7);
    const auto net = PCNetwork::random({2, 3}, Activation::Tanh, rng);
    std::stringstream buf;
    save_network(net, buf);
    std::string bytes = buf.str();

    std::stringstream bad_magic(std::string("XXXXXXXX") + bytes.substr(8));
    EXPECT_THROW(load_network(bad_magic), ParseError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(load_network(truncated), ParseError);
    std::string wrong_version = bytes;
    wrong_version[8] = 9;
    std::stringstream v(wrong_version);
    EXPECT_THROW(load_network(v), ParseError);
}

TEST(Checkpoint, LayoutIsLittleEndianWithDocumentedHeader) {
    PCNetwork net;
    net.dims = {1, 1};
    net.activation = Activation::Identity;
    net.weights = {Matrix{{1.0}}};
    std::stringstream buf;
    save_network(net, buf);
    const std::string b = buf.str();
    ASSERT_EQ(b.size(), 8u + 4 + 4 + 8 + 16 + 8);
    EXPECT_EQ(b.substr(0, 8), "PCNCKPT1");
    EXPECT_EQ(b[8], 1);   // version
    EXPECT_EQ(b[12], 2);  // identity
    EXPECT_EQ(b[16], 1);  // L
    EXPECT_EQ(static_cast<unsigned char>(b[b.size() - 1]), 0x3f);  // 1.0 = 0x3ff0000000000000
    EXPECT_EQ(static_cast<unsigned char>(b[b.size() - 2]), 0xf0);
}

}  // namespace
}  // namespace pcn
