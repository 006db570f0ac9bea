#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace latdis {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Mann-Whitney rank AUC with midrank tie correction:
// (sum of positive ranks - n_pos(n_pos+1)/2) / (n_pos * n_neg).
// Requires both classes present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Prediction is anomalous iff score >= threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold);

double accuracy(const ConfusionCounts& c);

// 2TP / (2TP + FP + FN); defined as 0 when the denominator is 0.
double f1(const ConfusionCounts& c);

// Nearest-rank percentile: the ceil(p/100 * N)-th order statistic
// (1-based). Always one of the sample values. Requires 0 < p <= 100.
double percentile(std::span<const double> values, double p);

struct SliceLabel {
    int label = 0;        // 1 anomalous, 0 healthy
    bool excluded = false;
};

// Tumour-size-threshold labeling: anomalous iff lesion_px > size_threshold;
// lesion_px == 0 is always healthy. Slices with 0 < lesion_px <=
// size_threshold are excluded from evaluation by default, or relabeled
// healthy when `relabel_healthy` is set.
std::vector<SliceLabel> label_slices(std::span<const std::uint32_t> lesion_px,
                                     double size_threshold, bool relabel_healthy = false);

}  // namespace latdis
