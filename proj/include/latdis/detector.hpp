#pragma once

#include <span>
#include <string>
#include <vector>

#include "latdis/rng.hpp"
#include "latdis/slice.hpp"
#include "latdis/vae.hpp"

namespace latdis {

enum class ScorerKind { Latent, Residual };

struct AnomalyScore {
    std::string slice_id;
    double score = 0.0;
    ScorerKind kind = ScorerKind::Latent;
};

// Euclidean distance between two posterior mean vectors.
double latent_distance(std::span<const float> a, std::span<const float> b);

// Dissimilarity of a slice and a given healthy-model reconstruction of it,
// measured between their posterior means under the unlabelled-cohort model.
double latent_score_from(const VaeModel& vae, const SliceImage& x, const SliceImage& x_h);

// Full latent scorer: reconstruct through vae_h, then encode both the
// slice and the reconstruction through vae and take the mean distance.
double latent_score(const SliceImage& x, const BrainMask& mask, const VaeModel& vae_h,
                    const VaeModel& vae);

// L2 residual over mask-interior pixels between x and a reconstruction.
double residual_score_from(const SliceImage& x, const SliceImage& x_h, const BrainMask& mask);

double residual_score(const SliceImage& x, const BrainMask& mask, const VaeModel& vae_h);

struct ThresholdSelection {
    double percentile = 0.0;    // chosen p
    double threshold = 0.0;     // d* = nearest-rank percentile of the healthy sample
    double selection_f1 = 0.0;  // F1 achieved on the selection subset
    std::vector<double> grid;
};

// Percentile grid 50.0 .. 99.5 in steps of 0.5.
std::vector<double> default_percentile_grid();

// Picks the grid percentile whose healthy-sample threshold maximizes F1 on
// the selection subset; ties break toward the larger percentile.
ThresholdSelection select_threshold(std::span<const double> healthy_val_scores,
                                    std::span<const double> selection_scores,
                                    std::span<const int> selection_labels,
                                    std::span<const double> grid);

enum class Classification { Healthy, Anomalous };

// Healthy iff score < threshold; a score equal to the threshold is
// anomalous.
Classification classify(double score, double threshold);

struct FoldMetrics {
    double roc_auc = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    double percentile = 0.0;
    double threshold = 0.0;
};

struct EvalReport {
    std::vector<FoldMetrics> folds;
    FoldMetrics mean;
    FoldMetrics stddev;  // sample standard deviation over folds
};

// k-fold protocol: the (seeded) shuffled pool is cut into k folds; fold i
// together with the fixed healthy-validation scores selects the
// percentile, and ROC-AUC / accuracy / F1 are computed on the remaining
// (k-1)/k. Throws DataError naming the fold if either side of a fold is
// single-class.
EvalReport cross_validate(std::span<const double> healthy_val_scores,
                          std::span<const double> scores, std::span<const int> labels, int k,
                          std::span<const double> grid, Rng& rng);

}  // namespace latdis
