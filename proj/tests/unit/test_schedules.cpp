#include <gtest/gtest.h>

#include "pcn/data.hpp"
#include "pcn/errors.hpp"
#include "pcn/metrics.hpp"
#include "pcn/schedules.hpp"
#include "test_support.hpp"

namespace pcn {
namespace {

using test::random_matrix;

ScheduleConfig config(Algorithm a, double gamma = 0.1, double alpha = 0.01, std::size_t T = 4) {
    ScheduleConfig c;
    c.algorithm = a;
    c.gamma = gamma;
    c.alpha = alpha;
    c.T = T;
    return c;
}

TEST(InferenceStep, ClampedLayersAreNeverModified) {
    Rng rng(1);
    const auto net = PCNetwork::random({3, 4, 5}, Activation::Tanh, rng);
    auto s = test::random_state(net, 3, rng);
    for (int t = 0; t < 20; ++t) {
        const auto next = inference_step(net, s, 0.2);
        EXPECT_EQ(next.values[0], s.values[0]);
        EXPECT_EQ(next.values[2], s.values[2]);
        s = next;
    }
}

TEST(InferenceStep, SmallStepsDecreaseEnergy) {
    Rng rng(2);
    const auto net = PCNetwork::random({3, 6, 6, 4}, Activation::Tanh, rng);
    auto s = test::random_state(net, 5, rng);
    double prev = energy(s);
    for (int t = 0; t < 50; ++t) {
        s = inference_step(net, s, 0.05);
        EXPECT_LE(energy(s), prev);
        prev = energy(s);
    }
}

TEST(InferenceStep, GenerativeModeMovesTheTopLayer) {
    Rng rng(3);
    const auto net = PCNetwork::random({3, 4}, Activation::Tanh, rng);
    const auto s = test::random_state(net, 2, rng, Mode::Generative);
    const auto next = inference_step(net, s, 0.5);
    EXPECT_NE(next.values[1], s.values[1]);
    EXPECT_EQ(next.values[0], s.values[0]);
}

TEST(WeightStep, ZeroLearningRateIsIdentity) {
    Rng rng(4);
    const auto net = PCNetwork::random({3, 4, 5}, Activation::Tanh, rng);
    const auto s = test::random_state(net, 3, rng);
    EXPECT_EQ(weight_step(net, s, 0.0), net);
}

TEST(WeightStep, SmallStepDecreasesEnergy) {
    Rng rng(5);
    const auto net = PCNetwork::random({3, 4, 5}, Activation::Tanh, rng);
    const auto s = test::random_state(net, 3, rng);
    EXPECT_LT(energy(weight_step(net, s, 1e-3), s), energy(s));
}

TEST(PcUpdate, SingleIterationEqualsIncrementalStepBitwise) {
    Rng rng(6);
    const auto net = PCNetwork::random({3, 5, 4, 6}, Activation::Tanh, rng);
    const auto s = test::random_supervised_state(net, 4, rng);
    const auto a = pc_update(net, s, config(Algorithm::PC, 0.3, 0.05, 1));
    const auto b = ipc_update(net, s, config(Algorithm::IPC, 0.3, 0.05));
    EXPECT_EQ(a.net, b.net);
    EXPECT_EQ(a.state, b.state);
}

TEST(PcUpdate, ObserverSeesEveryIteration) {
    Rng rng(7);
    const auto net = PCNetwork::random({2, 3, 4}, Activation::Tanh, rng);
    const auto s = test::random_supervised_state(net, 2, rng);
    SerialExecutor exec;
    int calls = 0;
    pc_update(net, s, config(Algorithm::PC, 0.1, 0.01, 12), exec,
              [&](const PCNetwork&, const NetworkState&) { ++calls; });
    EXPECT_EQ(calls, 12);
}

TEST(IpcUpdate, SequentialOrderDiffersFromSnapshotButBothLearn) {
    Rng rng(8);
    const auto net = PCNetwork::random({3, 5, 4}, Activation::Tanh, rng);
    const auto s = test::random_supervised_state(net, 4, rng);
    auto cfg = config(Algorithm::IPC, 0.3, 0.05);
    const auto snap = ipc_update(net, s, cfg);
    cfg.ipc_order = IpcOrder::Sequential;
    const auto seq = ipc_update(net, s, cfg);
    EXPECT_NE(snap.net, seq.net);
    EXPECT_LT(energy(snap.state), energy(s));
    EXPECT_LT(energy(seq.state), energy(s));
}

TEST(Zil, ReproducesBackpropagation) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t L = 1 + trial % 5;
        const auto net = PCNetwork::random(test::random_dims(L, 6, rng),
                                           trial % 2 ? Activation::Tanh : Activation::Identity, rng);
        const Matrix x = random_matrix(net.dims[L], 3, rng), y = random_matrix(net.dims[0], 3, rng);
        SerialExecutor exec;
        const auto s = prepare_batch(net, Mode::Supervised, x, y, x, exec);
        const auto zil = zil_update(net, s, config(Algorithm::ZIL, 1.0, 0.1), exec);
        const auto bp = bp_update(net, x, y, 0.1);
        for (std::size_t l = 0; l < L; ++l) EXPECT_LE(max_abs_diff(zil.weights[l], bp.weights[l]), 1e-12);
    }
}

TEST(Zil, RejectsNonUnitGammaAndNonEquilibriumStates) {
    Rng rng(10);
    const auto net = PCNetwork::random({2, 3, 4}, Activation::Tanh, rng);
    const auto s = test::random_state(net, 2, rng);
    EXPECT_THROW(zil_update(net, s, config(Algorithm::ZIL, 1.0)), ConfigError);
    const auto eq = test::random_supervised_state(net, 2, rng);
    EXPECT_THROW(zil_update(net, eq, config(Algorithm::ZIL, 0.5)), ConfigError);
    EXPECT_NO_THROW(zil_update(net, eq, config(Algorithm::ZIL, 1.0)));
}

// BP oracle: finite differences of the readout loss 1/2|y - forward(x)|^2 / B.
TEST(Bp, StepFollowsNegativeLossGradient) {
    Rng rng(11);
    const auto net = PCNetwork::random({2, 4, 3}, Activation::Tanh, rng);
    const Matrix x = random_matrix(3, 5, rng), y = random_matrix(2, 5, rng);
    const double alpha = 1.0, h = 1e-6;
    const auto next = bp_update(net, x, y, alpha);
    auto loss = [&](const PCNetwork& n) { return 0.5 * sum_squares(subtract(y, forward(n, x))) / 5.0; };
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
            auto p = net, m = net;
            p.weights[l].data()[i] += h;
            m.weights[l].data()[i] -= h;
            const double fd = -(loss(p) - loss(m)) / (2 * h);
            EXPECT_NEAR(next.weights[l].data()[i] - net.weights[l].data()[i], alpha * fd, 1e-8);
        }
}

TEST(Config, ValidateRanges) {
    auto c = config(Algorithm::IPC);
    EXPECT_NO_THROW(c.validate(3));
    c.gamma = 0.0;
    EXPECT_THROW(c.validate(3), ConfigError);
    c = config(Algorithm::ZIL, 0.5);
    EXPECT_THROW(c.validate(3), ConfigError);
    c = config(Algorithm::PC, 0.1, 0.01, 0);
    EXPECT_THROW(c.validate(3), ConfigError);
    EXPECT_THROW(parse_algorithm("adam"), ConfigError);
    EXPECT_EQ(parse_algorithm(to_string(Algorithm::ZIL)), Algorithm::ZIL);
}

TEST(Train, FullBatchIpcOnTeacherDataDecreasesEnergy) {
    const Dataset d = synthetic_generative(40, {6, 5, 3}, 1);
    Rng rng(2);
    const auto net = PCNetwork::random({6, 5, 3}, Activation::Tanh, rng);
    auto cfg = config(Algorithm::IPC, 0.1, 0.01);
    cfg.total_steps = 200;
    TrainOptions opt;
    opt.stop_on_plateau = false;
    const auto r = train(net, d, cfg, Mode::Generative, opt);
    ASSERT_EQ(r.energy_trace.size(), 201u);  // iteration 0 plus one per update
    EXPECT_EQ(r.trace_iterations.front(), 0u);
    EXPECT_LT(r.energy_trace.back(), r.energy_trace.front());
    EXPECT_EQ(r.ledger.weight_updates, 200u);
    EXPECT_EQ(r.trace_iterations.back(), 200u);
}

TEST(Train, MiniBatchSupervisedLearnsSyntheticClasses) {
    const Dataset d = synthetic_classification(300, {8, 6, 4}, 3, 5);
    for (auto a : {Algorithm::IPC, Algorithm::PC, Algorithm::BP, Algorithm::ZIL}) {
        Rng rng(6);
        const auto net = PCNetwork::random({3, 16, 8}, Activation::Tanh, rng);
        auto cfg = config(a, a == Algorithm::ZIL ? 1.0 : 0.3, 0.1, a == Algorithm::IPC ? 2 : 8);
        cfg.batch_size = 20;
        cfg.epochs = 8;
        const auto r = train(net, d, cfg, Mode::Supervised);
        ASSERT_EQ(r.epochs.size(), 8u) << to_string(a);
        EXPECT_LT(r.epochs.back().train_loss, supervised_loss(net, d)) << to_string(a);
        EXPECT_FALSE(r.diverged);
    }
}

TEST(Train, WarmStartKeepsLatentsAcrossEpochs) {
    const Dataset d = synthetic_classification(60, {8, 6, 4}, 3, 5);
    Rng rng(7);
    const auto net = PCNetwork::random({3, 8, 8}, Activation::Tanh, rng);
    auto cfg = config(Algorithm::IPC, 0.2, 0.05, 2);
    cfg.batch_size = 10;
    cfg.epochs = 3;
    const auto cold = train(net, d, cfg, Mode::Supervised);
    cfg.warm_start = true;
    const auto warm = train(net, d, cfg, Mode::Supervised);
    EXPECT_EQ(cold.epochs.size(), warm.epochs.size());
    EXPECT_NE(cold.network, warm.network);
}

TEST(Train, DivergenceProducesPartialReport) {
    const Dataset d = synthetic_classification(50, {8, 6, 4}, 3, 5);
    Rng rng(8);
    const auto net = PCNetwork::random({3, 8, 8}, Activation::Identity, rng);
    auto cfg = config(Algorithm::BP, 0.1, 1e6);
    cfg.batch_size = 10;
    cfg.epochs = 5;
    const auto r = train(net, d, cfg, Mode::Supervised);
    EXPECT_TRUE(r.diverged);
    EXPECT_FALSE(r.divergence.empty());
    EXPECT_NO_THROW(r.network.validate());
}

TEST(Train, EarlyStoppingKeepsBestValidationNetwork) {
    const Dataset all = synthetic_classification(200, {8, 6, 4}, 3, 9);
    auto [train_set, val] = split(all, 50, 1);
    Rng rng(10);
    const auto net = PCNetwork::random({3, 8, 8}, Activation::Tanh, rng);
    auto cfg = config(Algorithm::BP, 0.1, 0.2);
    cfg.batch_size = 10;
    cfg.epochs = 30;
    cfg.patience = 2;
    TrainOptions opt;
    opt.validation = &val;
    const auto r = train(net, train_set, cfg, Mode::Supervised, opt);
    double best = 0.0;
    for (const auto& e : r.epochs) best = std::max(best, e.validation_accuracy);
    EXPECT_DOUBLE_EQ(accuracy(predict(r.network, val)), best);
    EXPECT_DOUBLE_EQ(r.epochs[r.best_epoch].validation_accuracy, best);
}

TEST(Train, RejectsModeAlgorithmMismatch) {
    const Dataset d = synthetic_generative(10, {4, 3}, 1);
    Rng rng(1);
    const auto net = PCNetwork::random({4, 3}, Activation::Tanh, rng);
    auto cfg = config(Algorithm::BP);
    cfg.total_steps = 1;
    EXPECT_THROW(train(net, d, cfg, Mode::Generative), ConfigError);
    EXPECT_THROW(train(net, d, cfg, Mode::Supervised), UsageError);
}

}  // namespace
}  // namespace pcn
