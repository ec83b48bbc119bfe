#include "decgnn/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>

#include "decgnn/csv.hpp"
#include "decgnn/errors.hpp"

namespace decgnn {

namespace {
void check_inputs(std::size_t n_scores, std::span<const int> labels, const char* what) {
    if (n_scores == 0) throw DataError(std::string(what) + ": empty input");
    if (n_scores != labels.size())
        throw DataError(std::string(what) + ": " + std::to_string(n_scores) + " scores but " +
                        std::to_string(labels.size()) + " labels");
    for (int y : labels)
        if (y != 0 && y != 1) throw DataError(std::string(what) + ": labels must be 0 or 1");
}
}  // namespace

EvalReport confusion_metrics(std::span<const double> probs, std::span<const int> labels, double threshold) {
    check_inputs(probs.size(), labels, "confusion_metrics");
    EvalReport r;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        if (labels[i] == 1)
            pred ? ++r.tp : ++r.fn;
        else
            pred ? ++r.fp : ++r.tn;
    }
    const auto d = [](std::size_t x) { return static_cast<double>(x); };
    r.accuracy = d(r.tp + r.tn) / d(r.total());
    r.precision_degenerate = r.tp + r.fp == 0;
    r.precision = r.precision_degenerate ? 0.0 : d(r.tp) / d(r.tp + r.fp);
    r.recall_degenerate = r.tp + r.fn == 0;
    r.recall = r.recall_degenerate ? 0.0 : d(r.tp) / d(r.tp + r.fn);
    r.f1_degenerate = r.precision + r.recall == 0.0;
    r.f1 = r.f1_degenerate ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores.size(), labels, "roc_auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positive ranks with tied groups sharing their average rank.
    // Ranks are kept doubled so the sum stays an exact integer.
    std::uint64_t rank2_sum = 0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t avg_rank2 = static_cast<std::uint64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) {
                rank2_sum += avg_rank2;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: both classes must be present");
    const std::uint64_t base2 = static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
    const double u = static_cast<double>(rank2_sum - base2) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalReport evaluate(std::span<const double> probs, std::span<const int> labels, double threshold) {
    EvalReport r = confusion_metrics(probs, labels, threshold);
    r.roc_auc = roc_auc(probs, labels);
    return r;
}

void save_metrics(const std::vector<ClusterMetrics>& rows, const std::filesystem::path& path) {
    std::string out = "cluster_id,accuracy,precision,recall,f1,roc_auc\n";
    for (const auto& [cid, r] : rows)
        out += std::to_string(cid) + "," + csv::format_double(r.accuracy) + "," + csv::format_double(r.precision) +
               "," + csv::format_double(r.recall) + "," + csv::format_double(r.f1) + "," +
               csv::format_double(r.roc_auc) + "\n";
    csv::write_text(path, out);
}

}  // namespace decgnn
