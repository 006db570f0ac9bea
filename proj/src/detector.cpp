#include "latdis/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latdis/errors.hpp"
#include "latdis/metrics.hpp"

namespace latdis {

double latent_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw DataError("latent_distance: latent dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

double latent_score_from(const VaeModel& vae, const SliceImage& x, const SliceImage& x_h) {
    const auto post_x = encode(vae, x);
    const auto post_h = encode(vae, x_h);
    return latent_distance(post_x.mean, post_h.mean);
}

double latent_score(const SliceImage& x, const BrainMask& mask, const VaeModel& vae_h,
                    const VaeModel& vae) {
    return latent_score_from(vae, x, reconstruct(vae_h, x, mask));
}

double residual_score_from(const SliceImage& x, const SliceImage& x_h, const BrainMask& mask) {
    if (x_h.height != x.height || x_h.width != x.width)
        throw DataError("residual_score: reconstruction geometry mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        if (!mask.inside[i]) continue;
        const double d = static_cast<double>(x.pixels[i]) - static_cast<double>(x_h.pixels[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

double residual_score(const SliceImage& x, const BrainMask& mask, const VaeModel& vae_h) {
    return residual_score_from(x, reconstruct(vae_h, x, mask), mask);
}

std::vector<double> default_percentile_grid() {
    std::vector<double> grid;
    for (int i = 100; i <= 199; ++i) grid.push_back(i * 0.5);  // 50.0 .. 99.5
    return grid;
}

ThresholdSelection select_threshold(std::span<const double> healthy_val_scores,
                                    std::span<const double> selection_scores,
                                    std::span<const int> selection_labels,
                                    std::span<const double> grid) {
    if (healthy_val_scores.empty())
        throw DataError("select_threshold: empty healthy validation sample");
    if (grid.empty()) throw DataError("select_threshold: empty percentile grid");
    bool has_pos = false, has_neg = false;
    for (int l : selection_labels) (l != 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DataError("select_threshold: selection subset contains a single class");

    std::vector<double> sorted_grid(grid.begin(), grid.end());
    std::sort(sorted_grid.begin(), sorted_grid.end());

    ThresholdSelection best;
    best.grid = sorted_grid;
    best.selection_f1 = -1.0;
    for (double p : sorted_grid) {
        const double d = percentile(healthy_val_scores, p);
        const double score = f1(confusion(selection_scores, selection_labels, d));
        if (score >= best.selection_f1) {  // ties go to the larger percentile
            best.selection_f1 = score;
            best.percentile = p;
            best.threshold = d;
        }
    }
    return best;
}

Classification classify(double score, double threshold) {
    return score < threshold ? Classification::Healthy : Classification::Anomalous;
}

EvalReport cross_validate(std::span<const double> healthy_val_scores,
                          std::span<const double> scores, std::span<const int> labels, int k,
                          std::span<const double> grid, Rng& rng) {
    if (scores.size() != labels.size())
        throw DataError("cross_validate: scores and labels differ in length");
    if (k < 2) throw DataError("cross_validate: need k >= 2 folds");
    if (scores.size() < static_cast<std::size_t>(k))
        throw DataError("cross_validate: fewer slices than folds");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    EvalReport report;
    for (int fold = 0; fold < k; ++fold) {
        const std::size_t lo = fold * n / k;
        const std::size_t hi = (fold + 1) * n / k;

        std::vector<double> sel_scores, eval_scores;
        std::vector<int> sel_labels, eval_labels;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = order[i];
            if (i >= lo && i < hi) {
                sel_scores.push_back(scores[idx]);
                sel_labels.push_back(labels[idx]);
            } else {
                eval_scores.push_back(scores[idx]);
                eval_labels.push_back(labels[idx]);
            }
        }

        auto single_class = [](const std::vector<int>& ls) {
            bool pos = false, neg = false;
            for (int l : ls) (l != 0 ? pos : neg) = true;
            return !pos || !neg;
        };
        if (single_class(sel_labels) || single_class(eval_labels))
            throw DataError("cross_validate: fold " + std::to_string(fold) +
                            " contains a single class");

        const ThresholdSelection sel =
            select_threshold(healthy_val_scores, sel_scores, sel_labels, grid);
        const ConfusionCounts counts = confusion(eval_scores, eval_labels, sel.threshold);
        FoldMetrics fm;
        fm.roc_auc = roc_auc(eval_scores, eval_labels);
        fm.accuracy = accuracy(counts);
        fm.f1 = f1(counts);
        fm.percentile = sel.percentile;
        fm.threshold = sel.threshold;
        report.folds.push_back(fm);
    }

    auto aggregate = [&](auto member) {
        double mean = 0.0;
        for (const auto& f : report.folds) mean += f.*member;
        mean /= static_cast<double>(report.folds.size());
        double var = 0.0;
        for (const auto& f : report.folds) var += (f.*member - mean) * (f.*member - mean);
        const double sd = report.folds.size() > 1
                              ? std::sqrt(var / static_cast<double>(report.folds.size() - 1))
                              : 0.0;
        return std::pair<double, double>(mean, sd);
    };
    std::tie(report.mean.roc_auc, report.stddev.roc_auc) = aggregate(&FoldMetrics::roc_auc);
    std::tie(report.mean.accuracy, report.stddev.accuracy) = aggregate(&FoldMetrics::accuracy);
    std::tie(report.mean.f1, report.stddev.f1) = aggregate(&FoldMetrics::f1);
    std::tie(report.mean.percentile, report.stddev.percentile) =
        aggregate(&FoldMetrics::percentile);
    std::tie(report.mean.threshold, report.stddev.threshold) = aggregate(&FoldMetrics::threshold);
    return report;
}

}  // namespace latdis
