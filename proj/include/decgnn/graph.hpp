#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "decgnn/dec.hpp"
#include "decgnn/numerics.hpp"
#include "decgnn/rng.hpp"

namespace decgnn {

// A drug -> disease "treats" edge by node index.
struct Edge {
    int drug = 0;
    int disease = 0;
    auto operator<=>(const Edge&) const = default;
};

using EdgeList = std::vector<Edge>;

// Neighbour lists for message passing in both directions.
struct Adjacency {
    std::vector<std::vector<int>> drug_to_diseases;
    std::vector<std::vector<int>> disease_to_drugs;
};
Adjacency build_adjacency(int n_drugs, int n_diseases, const EdgeList& edges);

struct BipartiteGraph {
    int cluster_id = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> drug_ids;
    Matrix drug_features;  // [n_drugs x dim]
    std::vector<std::string> disease_ids;
    Matrix disease_embeddings;  // [n_diseases x dim]
    EdgeList edges_treat;
    std::vector<std::pair<int, int>> edges_reverse;  // (disease, drug), transpose of edges_treat
    Adjacency adjacency;

    int n_drugs() const { return static_cast<int>(drug_ids.size()); }
    int n_diseases() const { return static_cast<int>(disease_ids.size()); }
    Index dim() const { return drug_features.cols(); }

    // Reverse list is the exact transpose, indices in range, no duplicate edges.
    void validate() const;
};

// Entries i.i.d. uniform in (-scale, +scale).
Matrix init_disease_embeddings(int n, Index dim, std::uint64_t seed, double scale = 0.01);

// Drug nodes are every drug of the cluster (features = latent vectors);
// disease nodes are the distinct diseases of its links in sorted order.
BipartiteGraph build_bipartite(const ClusterSubset& cluster, std::uint64_t seed, double disease_scale = 0.01);

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct EdgeSplit {
    EdgeList train_pos, val_pos, test_pos;
    EdgeList train_neg, val_neg, test_neg;
};

std::uint64_t edge_key(const Edge& e, int n_diseases);
std::unordered_set<std::uint64_t> edge_keys(const EdgeList& edges, int n_diseases);

// Uniform shuffle then contiguous cut into train/val/test positives; val and
// test get floor(n * ratio), train keeps the remainder.
EdgeSplit split_edges(const BipartiteGraph& graph, const SplitRatios& ratios, std::uint64_t seed);

// `count` distinct drug x disease pairs drawn uniformly from pairs not in
// `forbidden`.
EdgeList sample_negatives(const BipartiteGraph& graph, std::size_t count, RngStream& rng,
                          const std::unordered_set<std::uint64_t>& forbidden);

// Positive split plus fixed validation/test negatives and an initial training
// negative set, all mutually disjoint and disjoint from every positive.
EdgeSplit make_split(const BipartiteGraph& graph, const SplitRatios& ratios, std::uint64_t seed);

// Null-model control: within each of train/val/test, the pooled positives
// and negatives are relabelled uniformly at random with counts preserved.
EdgeSplit permute_split_labels(const EdgeSplit& split, std::uint64_t seed);

// Debug dump: node ids, edge lists, split and seed provenance.
void dump_graph(const BipartiteGraph& graph, const EdgeSplit* split, const std::filesystem::path& path);

}  // namespace decgnn
