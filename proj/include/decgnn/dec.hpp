#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decgnn/autoencoder.hpp"
#include "decgnn/numerics.hpp"
#include "decgnn/preprocess.hpp"

namespace decgnn {

struct KMeansResult {
    Matrix centers;                // [k x dim]
    std::vector<int> assignments;  // cluster per point
    int iterations = 0;
    double inertia = 0.0;          // sum of squared distances to assigned centers
};

// Lloyd iterations from k-means++ seeds. Distance ties go to the lowest
// cluster index; an emptied cluster is re-seeded with the point farthest from
// its current center.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iter = 300);

// Student-t (one degree of freedom) soft assignment of rows of z to centers.
Matrix soft_assign(const Matrix& z, const Matrix& centers);

// p_ij proportional to q_ij^2 / f_j with f_j = sum_i q_ij; rows normalized.
// Columns with f_j == 0 contribute zero.
Matrix target_distribution(const Matrix& q);

// Row-averaged KL(P || Q); 0 ln 0 = 0 and q is floored at 1e-12.
double kl_divergence(const Matrix& p, const Matrix& q);

std::vector<int> hard_assignments(const Matrix& q);

struct DecGrads {
    double loss = 0.0;
    Matrix z;        // dL/dz  [n x dim]
    Matrix centers;  // dL/dmu [k x dim]
};
// KL(P || Q(z, centers)) with P held fixed, and its gradients.
DecGrads dec_loss_and_grads(const Matrix& z, const Matrix& centers, const Matrix& p);

// Mean silhouette with Euclidean distances. Points in singleton clusters
// contribute 0, as do points with a == b == 0. Requires two or more
// non-empty clusters.
double silhouette_score(const Matrix& points, std::span<const int> assignments);

struct SweepResult {
    std::vector<std::pair<int, double>> curve;  // (k, silhouette), ascending k
    int selected_k = 0;
};

// Runs k-means plus silhouette for every k in [k_min, k_max]. The selected k
// is the best-scoring local maximum with k >= k_min_useful (a local maximum
// is at least as good as each neighbour present on the curve); if none
// exists the global maximum is selected. Each k uses its own RNG stream, so
// threads > 1 produces the same curve.
SweepResult k_sweep(const Matrix& embedding, int k_min, int k_max, std::uint64_t seed, int k_min_useful = 5,
                    int threads = 1);

struct DecConfig {
    int k = 0;
    double lr = 1e-3;
    int update_interval = 20;
    double tol = 0.001;
    int max_epochs = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ClusterModel {
    Matrix centers;
    std::vector<int> assignments;
    Matrix q;
    Matrix p;
    double silhouette = 0.0;
};

struct DecResult {
    Autoencoder model;         // encoder refined by DEC; decoder untouched
    LatentEmbedding embedding; // refined embedding
    ClusterModel clusters;
    KMeansResult initial;      // k-means on the incoming embedding
    double initial_silhouette = 0.0;
    std::vector<double> kl_history;        // one entry per epoch
    std::vector<double> change_fractions;  // one entry per target update after the first
    std::vector<int> update_epochs;        // epochs at which P was recomputed
    int epochs = 0;
    bool converged = false;
};

// Jointly refines the encoder and the cluster centers by Adam on KL(P || Q).
// P is recomputed every update_interval epochs; training stops once the
// fraction of changed hard assignments between consecutive updates drops
// below tol, or after max_epochs.
DecResult train_dec(const Autoencoder& model, const FeatureTable& table, const DecConfig& config);

struct ClusterSubset {
    int cluster_id = 0;
    std::vector<std::string> drug_ids;
    Matrix latent;
    LinkTable links;
};

struct ClusterPartition {
    std::vector<ClusterSubset> clusters;  // ascending cluster_id
};

// Routes every drug and each link to the cluster of its drug.
ClusterPartition partition_clusters(const LatentEmbedding& embedding, std::span<const int> assignments,
                                    const LinkTable& links);

void save_clusters(const std::vector<std::string>& ids, std::span<const int> assignments,
                   const std::filesystem::path& path);
std::vector<std::pair<std::string, int>> load_clusters(const std::filesystem::path& path);
void save_sweep(const SweepResult& sweep, const std::filesystem::path& path);

}  // namespace decgnn
