#include "pcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>

#include "pcn/errors.hpp"

namespace pcn {

void PredictionBatch::validate() const {
    if (logits.cols() != labels.size())
        throw ShapeError("PredictionBatch: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.cols()) + " samples");
    for (auto l : labels)
        if (l >= logits.rows()) throw ShapeError("PredictionBatch: label out of range");
}

Matrix softmax(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t j = 0; j < logits.cols(); ++j) {
        double peak = logits(0, j);
        for (std::size_t i = 1; i < logits.rows(); ++i) peak = std::max(peak, logits(i, j));
        double total = 0.0;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            p(i, j) = std::exp(logits(i, j) - peak);
            total += p(i, j);
        }
        for (std::size_t i = 0; i < logits.rows(); ++i) p(i, j) /= total;
    }
    return p;
}

std::vector<std::size_t> argmax_columns(const Matrix& m) {
    std::vector<std::size_t> out(m.cols(), 0);
    for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 1; i < m.rows(); ++i)
            if (m(i, j) > m(out[j], j)) out[j] = i;
    return out;
}

double accuracy(const PredictionBatch& preds) {
    preds.validate();
    if (preds.labels.empty()) throw UsageError("accuracy: empty batch");
    const auto guess = argmax_columns(preds.logits);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < guess.size(); ++j) hits += guess[j] == preds.labels[j];
    return static_cast<double>(hits) / static_cast<double>(guess.size());
}

CalibrationReport ada_ece(std::span<const double> confidence, std::span<const bool> correct,
                          std::size_t n_bins) {
    const std::size_t n = confidence.size();
    if (correct.size() != n) throw ShapeError("ada_ece: confidence/correct length mismatch");
    if (n_bins == 0) throw UsageError("ada_ece: n_bins must be >= 1");
    if (n < n_bins)
        throw UsageError("ada_ece: " + std::to_string(n) + " samples for " +
                         std::to_string(n_bins) + " bins");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return confidence[a] < confidence[b]; });

    CalibrationReport report;
    report.n_bins = n_bins;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t lo = b * n / n_bins, hi = (b + 1) * n / n_bins;
        CalibrationBin bin;
        bin.count = hi - lo;
        double conf = 0.0, hits = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            conf += confidence[order[k]];
            hits += correct[order[k]] ? 1.0 : 0.0;
        }
        bin.confidence = conf / static_cast<double>(bin.count);
        bin.accuracy = hits / static_cast<double>(bin.count);
        report.ada_ece += std::abs(bin.accuracy - bin.confidence) * static_cast<double>(bin.count) /
                          static_cast<double>(n);
        report.bins.push_back(bin);
    }
    return report;
}

CalibrationReport ada_ece(const PredictionBatch& preds, std::size_t n_bins) {
    preds.validate();
    const Matrix p = softmax(preds.logits);
    const auto guess = argmax_columns(p);
    std::vector<double> conf(p.cols());
    // std::vector<bool> has no contiguous storage; keep a plain bool buffer.
    std::unique_ptr<bool[]> hit(new bool[p.cols()]);
    for (std::size_t j = 0; j < p.cols(); ++j) {
        conf[j] = p(guess[j], j);
        hit[j] = guess[j] == preds.labels[j];
    }
    return ada_ece(conf, std::span<const bool>(hit.get(), p.cols()), n_bins);
}

PredictionBatch predict(const PCNetwork& net, const Dataset& data) {
    if (!data.labels) throw UsageError("predict: dataset '" + data.name + "' has no labels");
    return {forward(net, data.inputs), data.classes};
}

std::vector<ShiftRow> shift_study(const PCNetwork& net, const Dataset& test,
                                  const std::vector<CorruptionKind>& corruptions,
                                  const std::vector<int>& levels, const std::string& model_name,
                                  const CorruptionTable& table, std::uint64_t seed,
                                  std::size_t n_bins) {
    std::vector<ShiftRow> rows;
    auto evaluate = [&](const Dataset& d, const std::string& kind, int level) {
        const auto preds = predict(net, d);
        rows.push_back({model_name, kind, level, accuracy(preds), ada_ece(preds, n_bins).ada_ece});
    };
    evaluate(test, "none", 0);
    for (auto kind : corruptions)
        for (int level : levels) {
            if (level == 0) continue;
            const Corruption c{kind, level, seed + static_cast<std::uint64_t>(level)};
            evaluate(corrupt(test, c, table), to_string(kind), level);
        }
    return rows;
}

double median_metric(const std::vector<ShiftRow>& rows, const std::string& model, int level,
                     bool use_ece) {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.model == model && r.level == level) v.push_back(use_ece ? r.ada_ece : r.accuracy);
    if (v.empty()) throw UsageError("median_metric: no rows for model '" + model + "'");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_shift_csv(std::ostream& out, const std::vector<ShiftRow>& rows) {
    out << "model,corruption,level,accuracy,ada_ece\n";
    const auto old = out.precision(10);
    for (const auto& r : rows)
        out << r.model << ',' << r.corruption << ',' << r.level << ',' << r.accuracy << ','
            << r.ada_ece << '\n';
    out.precision(old);
}

}  // namespace pcn
