#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "decgnn/numerics.hpp"

namespace decgnn {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FeatureKind { Numeric, Categorical };

struct FeatureColumn {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    // Categorical code -> original text, filled by enumerate_categoricals.
    std::vector<std::string> categories;
    bool enumerated = false;
};

// Drugs x features. Unobserved cells hold NaN and have observed == false.
// Categorical columns keep their raw text in `pending_text` until
// enumerate_categoricals replaces it with integer codes.
struct FeatureTable {
    std::vector<std::string> chemical_ids;
    std::vector<FeatureColumn> columns;
    Matrix values;
    BoolMatrix observed;
    std::unordered_map<std::size_t, std::vector<std::string>> pending_text;

    std::size_t rows() const { return chemical_ids.size(); }
    std::size_t cols() const { return columns.size(); }
    bool fully_observed() const { return observed.all(); }
    double completeness(std::size_t row) const;
    std::unordered_map<std::string, std::size_t> id_index() const;

    // ids unique, shapes congruent, observed numeric cells finite.
    void validate() const;
};

struct LinkTable {
    std::vector<std::pair<std::string, std::string>> records;  // (chemical_id, disease_id)

    // Drops repeated pairs, keeping first occurrences in order.
    void deduplicate();
};

FeatureTable load_feature_table(const std::filesystem::path& path);
void save_feature_table(const FeatureTable& table, const std::filesystem::path& path);
LinkTable load_link_table(const std::filesystem::path& path);
void save_link_table(const LinkTable& links, const std::filesystem::path& path);

struct FilterResult {
    FeatureTable table;
    std::vector<std::string> dropped_ids;
    std::optional<std::string> warning;  // set when nothing survives
};
// Keeps rows whose observed fraction is >= threshold, in original order.
FilterResult filter_completeness(const FeatureTable& table, double threshold = 0.70);

// Distance between two rows over their mutually observed numeric columns:
// sqrt(sum of squared differences / shared count); +inf when none are shared.
double shared_column_distance(const FeatureTable& table, std::size_t a, std::size_t b);

// Fills each missing cell from the k nearest rows that observe the column
// (ties broken by lower row index): mean for numeric columns, most frequent
// code (lowest on ties) for enumerated categorical columns.
FeatureTable knn_impute(const FeatureTable& table, std::size_t k = 5);

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // population; 0 marks a constant column
    std::vector<bool> applied;   // false for categorical columns
};
std::pair<FeatureTable, NormalizationStats> zscore_normalize(const FeatureTable& table);
FeatureTable inverse_zscore(const FeatureTable& table, const NormalizationStats& stats);

// Replaces categorical text with codes 0..K-1 in first-appearance order.
FeatureTable enumerate_categoricals(const FeatureTable& table);
std::vector<std::string> decode_categorical(const FeatureTable& table, std::size_t column);

// Denormalized drug rows, one per drug-disease link. Chemical ids repeat.
struct JoinedRecords {
    FeatureTable rows;  // validate() is not applicable: ids repeat
    std::vector<std::string> disease_ids;
};
JoinedRecords load_joined_records(const std::filesystem::path& path);

struct UniqueDrugView {
    FeatureTable drugs;
    LinkTable links;
};
// One row per chemical id (first occurrence wins) with disease labels split
// off into a link table.
UniqueDrugView unique_drug_view(const JoinedRecords& joined);

struct SynthConfig {
    int n_clusters = 5;
    int drugs_per_cluster = 40;
    int diseases_per_cluster = 12;
    int feature_dim = 64;
    double noise_sigma = 0.5;
    double link_density_within = 0.6;
    double link_density_cross = 0.02;
    double missing_rate = 0.1;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SyntheticData {
    FeatureTable features;
    LinkTable links;
    std::vector<int> truth;  // planted cluster per feature row
};

SyntheticData generate_synthetic(const SynthConfig& config);
void save_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace decgnn
