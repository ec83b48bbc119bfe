#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "decgnn/graph.hpp"
#include "decgnn/metrics.hpp"
#include "decgnn/numerics.hpp"
#include "decgnn/rng.hpp"

namespace decgnn {

using NeighborLists = std::vector<std::vector<int>>;

// One SAGE relation: h' = W_self h_target + W_neigh mean(h_source) + b.
struct SageWeights {
    Matrix w_self;   // [out x in_target]
    Matrix w_neigh;  // [out x in_source]
    Vector bias;     // [out]

    Index out_dim() const { return w_self.rows(); }
    Index target_dim() const { return w_self.cols(); }
    Index source_dim() const { return w_neigh.cols(); }

    // He-uniform over the combined fan-in target_dim + source_dim; zero bias.
    static SageWeights initialized(Index target_dim, Index source_dim, Index out_dim, RngStream& rng);
    static SageWeights zeros(Index target_dim, Index source_dim, Index out_dim);
};

struct SageCache {
    Matrix target;
    Matrix aggregate;
    const NeighborLists* neighbors = nullptr;
    Index n_source = 0;
};

struct SageGrads {
    Matrix target;
    Matrix source;
    Matrix w_self;
    Matrix w_neigh;
    Vector bias;
};

// neighbors[v] lists the source rows feeding target row v. A target with no
// neighbours aggregates the zero vector.
Matrix sage_conv(const Matrix& target, const Matrix& source, const NeighborLists& neighbors, const SageWeights& w,
                 SageCache* cache = nullptr);
SageGrads sage_conv_backward(const Matrix& grad_output, const SageCache& cache, const SageWeights& w);

struct HeteroLayer {
    SageWeights drug_from_disease;  // reverse relation
    SageWeights disease_from_drug;  // treat relation
};

struct GnnTrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.0;
    bool decoupled_weight_decay = true;
    int hidden_dim = 128;
    int n_layers = 3;
    double dropout = 0.1;
    int max_epochs = 200;
    int patience = 10;
    double min_delta = 0.0;
    std::uint64_t seed = 0;
    // false keeps split.train_neg for every epoch (used by the label-permutation control).
    bool resample_negatives = true;

    void validate() const;
};

struct GnnModel {
    int hidden_dim = 0;
    double dropout = 0.0;
    std::vector<HeteroLayer> layers;
    Matrix disease_embeddings;  // trainable disease node inputs
    LayerStack decoder;         // Dense(2H -> H, ReLU), Dense(H -> 1); output layer starts at zero
    EdgeList message_edges;     // edges used for message passing

    int n_layers() const { return static_cast<int>(layers.size()); }

    static GnnModel initialized(Index drug_dim, const Matrix& disease_init, int hidden_dim, int n_layers,
                                double dropout, RngStream& rng);

    // Per layer: drug_from_disease (w_self, w_neigh, bias), then
    // disease_from_drug; then decoder layers; then disease embeddings.
    std::vector<ParamView> parameters();
    std::size_t parameter_count() const;
    void validate(Index drug_dim) const;
};

struct NodeEmbeddings {
    Matrix drug;
    Matrix disease;
};

struct HeteroCache {
    std::vector<SageCache> to_drug;
    std::vector<SageCache> to_disease;
    std::vector<Matrix> drug_pre;
    std::vector<Matrix> disease_pre;
};

// All relations of a layer read the previous layer's outputs; ReLU between
// layers, none after the last.
NodeEmbeddings hetero_forward(const BipartiteGraph& graph, const GnnModel& model, const Adjacency& messages,
                              HeteroCache* cache = nullptr);

struct DecoderCache {
    std::vector<DenseCache> dense;
    Matrix dropout_mask;
};

// Logits for each edge: concat(drug, disease) -> Dense+ReLU -> dropout -> Dense.
Vector decode_edges(const NodeEmbeddings& emb, const EdgeList& edges, const GnnModel& model, bool training,
                    RngStream* rng, DecoderCache* cache = nullptr);
double decode_edge(const Vector& drug_emb, const Vector& disease_emb, const GnnModel& model, bool training,
                   RngStream* rng);

struct GnnGrads {
    std::vector<SageGrads> drug_from_disease;
    std::vector<SageGrads> disease_from_drug;
    std::vector<DenseGrads> decoder;
    Matrix disease_embeddings;

    // Same order as GnnModel::parameters().
    std::vector<GradView> views() const;
};

struct GnnLoss {
    double loss = 0.0;
    GnnGrads grads;
};

// Mean BCE-with-logits over `edges` and its gradient w.r.t. every parameter.
GnnLoss gnn_loss_and_grads(const BipartiteGraph& graph, const GnnModel& model, const Adjacency& messages,
                           const EdgeList& edges, const Vector& labels, bool training, RngStream* rng);

struct GnnEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double val_f1 = 0.0;
    double val_roc_auc = 0.0;
};

struct GnnTrainResult {
    GnnModel model;  // best-validation parameters
    std::vector<GnnEpoch> history;
    int best_epoch = -1;
    bool early_stopped = false;
};

// Full-graph training with messages over train positives only. Training
// negatives are redrawn each epoch after the first; validation negatives stay
// fixed. Stops after `patience` epochs without a validation ROC-AUC gain.
GnnTrainResult train_gnn(const BipartiteGraph& graph, const EdgeSplit& split, const GnnTrainConfig& config);

// Inference-mode link probabilities.
std::vector<double> predict_links(const GnnModel& model, const BipartiteGraph& graph, const EdgeList& candidates);

// Metrics on positives (label 1) followed by negatives (label 0).
EvalReport evaluate_links(const GnnModel& model, const BipartiteGraph& graph, const EdgeList& positives,
                          const EdgeList& negatives);

void save_gnn(const GnnModel& model, const GnnTrainConfig& config, const std::filesystem::path& path);
GnnModel load_gnn(const std::filesystem::path& path, GnnTrainConfig* config = nullptr);

// epoch,train_loss,val_f1,val_roc_auc
void save_history(const std::vector<GnnEpoch>& history, const std::filesystem::path& path);

}  // namespace decgnn
