#include "latdis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace latdis {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("roc_auc: scores and labels differ in length");
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l != 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_auc: both classes must be present");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]] != 0) pos_rank_sum += midrank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("confusion: scores and labels differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual)
            ++c.tp;
        else if (predicted && !actual)
            ++c.fp;
        else if (!predicted && actual)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double accuracy(const ConfusionCounts& c) {
    const std::size_t n = c.total();
    return n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

double f1(const ConfusionCounts& c) {
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    if (!(p > 0.0) || p > 100.0)
        throw std::invalid_argument("percentile: p must lie in (0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double q = p * static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::vector<SliceLabel> label_slices(std::span<const std::uint32_t> lesion_px,
                                     double size_threshold, bool relabel_healthy) {
    if (size_threshold < 0.0)
        throw std::invalid_argument("label_slices: size threshold must be nonnegative");
    std::vector<SliceLabel> out(lesion_px.size());
    for (std::size_t i = 0; i < lesion_px.size(); ++i) {
        const double px = static_cast<double>(lesion_px[i]);
        if (px > size_threshold)
            out[i] = {1, false};
        else if (lesion_px[i] == 0)
            out[i] = {0, false};
        else
            out[i] = relabel_healthy ? SliceLabel{0, false} : SliceLabel{0, true};
    }
    return out;
}

}  // namespace latdis
