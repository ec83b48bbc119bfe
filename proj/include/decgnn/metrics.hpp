#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace decgnn {

struct EvalReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double roc_auc = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    bool precision_degenerate = false;  // no positive predictions
    bool recall_degenerate = false;     // no positive labels
    bool f1_degenerate = false;         // precision + recall == 0

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Predictions are prob >= threshold. Undefined ratios are reported as 0 and
// flagged. roc_auc is left at 0.
EvalReport confusion_metrics(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);

// Mann-Whitney AUC: share of (positive, negative) pairs ordered correctly,
// ties worth one half. O(n log n) via average ranks.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Confusion metrics plus ROC-AUC.
EvalReport evaluate(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);

struct ClusterMetrics {
    int cluster_id = 0;
    EvalReport report;
};
// cluster_id,accuracy,precision,recall,f1,roc_auc
void save_metrics(const std::vector<ClusterMetrics>& rows, const std::filesystem::path& path);

}  // namespace decgnn
