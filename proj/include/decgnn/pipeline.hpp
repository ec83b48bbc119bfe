#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "decgnn/autoencoder.hpp"
#include "decgnn/gnn.hpp"
#include "decgnn/graph.hpp"
#include "decgnn/metrics.hpp"
#include "decgnn/preprocess.hpp"

namespace decgnn {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kConfigVersion = 1;

// One-at-a-time change relative to the grid base; unset fields keep the base.
struct GridVariation {
    std::string name;
    std::optional<int> n_layers;
    std::optional<double> lr;
    std::optional<double> weight_decay;
    std::optional<double> dropout;
    std::optional<int> hidden_dim;

    GnnTrainConfig apply(const GnnTrainConfig& base) const;
};

struct GridSpec {
    GridVariation base;                   // applied to the gnn section first
    std::vector<GridVariation> variations;  // one row each

    // Base 3 layers / lr 1e-3 / wd 0 / dropout 0.1 / hidden 32, then the
    // baseline itself and one variation per alternative value.
    static GridSpec standard();
};

struct PipelineConfig {
    int config_version = kConfigVersion;
    std::uint64_t master_seed = 42;

    std::string features_path;  // empty: use the synthetic set in the output dir
    std::string links_path;
    std::string joined_path;    // alternative single-file input
    std::string output_dir = "decgnn_out";

    SynthConfig synth;

    double completeness_threshold = 0.70;
    std::size_t knn_k = 5;

    Index latent_dim = 8;
    std::vector<double> ae_lr_grid{1e-4, 1e-3};
    AeTrainConfig ae;

    int dec_k = 0;  // 0 selects k by silhouette sweep
    int sweep_k_min = 2;
    int sweep_k_max = 10;
    int k_min_useful = 5;
    double dec_lr = 1e-3;
    int dec_update_interval = 20;
    double dec_tol = 0.001;
    int dec_max_epochs = 1000;

    GnnTrainConfig gnn;
    SplitRatios split;
    double disease_scale = 0.01;

    GridSpec grid = GridSpec::standard();

    double probability_threshold = 0.99;

    int threads = 1;
    std::vector<int> cluster_order;  // empty: ascending cluster id

    void validate() const;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& config);
// Dotted key into the JSON layout, e.g. "gnn.lr" = "0.01". The value is
// parsed as JSON when possible, otherwise taken as a string.
void apply_override(PipelineConfig& config, const std::string& key, const std::string& value);

struct GridRow {
    std::string name;
    GnnTrainConfig config;
    EvalReport test;
    int epochs = 0;
    std::string status = "ok";
};

// Trains one model per variation on the same graph and split; a failed
// variation is recorded in its row and the grid continues.
std::vector<GridRow> hyperparameter_grid(const BipartiteGraph& graph, const EdgeSplit& split,
                                         const GnnTrainConfig& base, const std::vector<GridVariation>& variations);
void save_grid(const std::vector<GridRow>& rows, const std::filesystem::path& path);

// Every drug x disease pair of the graph that is not a training edge.
EdgeList enumerate_candidates(const BipartiteGraph& graph, const EdgeList& train_edges);

struct Prediction {
    int cluster_id = 0;
    std::string chemical_id;
    std::string disease_id;
    double probability = 0.0;
    int rank = 0;
};

struct RankedPredictions {
    std::vector<Prediction> all;
    std::vector<Prediction> confident;  // probability >= threshold
};

// Descending probability, ties by (chemical_id, disease_id); ranks are
// 1-based positions in the full list.
RankedPredictions rank_and_filter(std::vector<Prediction> predictions, double threshold = 0.99);
// cluster_id,chemical_id,disease_id,probability,rank
void save_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

struct StageResult {
    std::string stage;
    double seconds = 0.0;
    std::vector<std::string> warnings;
};

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"synth",     "preprocess", "train-ae", "cluster",
                                                "train-gnn", "grid",       "predict"};
    return names;
}

// Runs one stage ("run-all" runs the full sequence, synthesizing input when no
// input path is configured). Errors keep their category and gain the stage
// name as a prefix; artifacts written before the failure are kept.
std::vector<StageResult> run_stage(const PipelineConfig& config, const std::string& stage);
std::vector<StageResult> run_pipeline(const PipelineConfig& config);

std::uint64_t cluster_seed(std::uint64_t master_seed, int cluster_id);

// Checks the manifest's required fields; throws DataError when malformed.
void validate_manifest(const std::filesystem::path& path);

}  // namespace decgnn
