#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pcn/data.hpp"
#include "pcn/matrix.hpp"
#include "pcn/network.hpp"

namespace pcn {

// Output-layer readout (classes × samples) and the true class of each sample.
struct PredictionBatch {
    Matrix logits;
    std::vector<std::size_t> labels;

    void validate() const;
};

// Column-wise softmax, shifted by the column max.
Matrix softmax(const Matrix& logits);

// Lowest index wins ties.
std::vector<std::size_t> argmax_columns(const Matrix& m);

// Fraction of samples whose argmax matches the label.
double accuracy(const PredictionBatch& preds);

struct CalibrationBin {
    double confidence = 0.0;  // mean confidence in the bin
    double accuracy = 0.0;
    std::size_t count = 0;
};

struct CalibrationReport {
    double ada_ece = 0.0;
    std::size_t n_bins = 0;
    std::vector<CalibrationBin> bins;
};

// Adaptive ECE over equal-mass bins. Samples are stable-sorted by confidence
// and bin b takes sorted positions [floor(b·N/K), floor((b+1)·N/K)).
// AdaECE = sum_b |acc_b - conf_b| · count_b / N.
CalibrationReport ada_ece(std::span<const double> confidence, std::span<const bool> correct,
                          std::size_t n_bins = 15);
// Confidence is the max softmax probability of each column of the logits.
CalibrationReport ada_ece(const PredictionBatch& preds, std::size_t n_bins = 15);

// Readout of a network on a labeled dataset: logits = forward pass output.
PredictionBatch predict(const PCNetwork& net, const Dataset& data);

struct ShiftRow {
    std::string model;
    std::string corruption;  // "none" for the clean row
    int level = 0;
    double accuracy = 0.0;
    double ada_ece = 0.0;
};

// Clean row (level 0) followed by one row per (corruption, level).
std::vector<ShiftRow> shift_study(const PCNetwork& net, const Dataset& test,
                                  const std::vector<CorruptionKind>& corruptions,
                                  const std::vector<int>& levels, const std::string& model_name,
                                  const CorruptionTable& table = CorruptionTable::defaults(),
                                  std::uint64_t seed = 0, std::size_t n_bins = 15);

// Median over rows with the given model and level.
double median_metric(const std::vector<ShiftRow>& rows, const std::string& model, int level,
                     bool use_ece);

// Header + rows, '.' decimal separator, fixed column order:
// model,corruption,level,accuracy,ada_ece
void write_shift_csv(std::ostream& out, const std::vector<ShiftRow>& rows);

}  // namespace pcn
