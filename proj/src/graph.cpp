#include "decgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "decgnn/errors.hpp"
#include "json_io.hpp"

namespace decgnn {

Adjacency build_adjacency(int n_drugs, int n_diseases, const EdgeList& edges) {
    Adjacency adj;
    adj.drug_to_diseases.resize(static_cast<std::size_t>(n_drugs));
    adj.disease_to_drugs.resize(static_cast<std::size_t>(n_diseases));
    for (const auto& e : edges) {
        if (e.drug < 0 || e.drug >= n_drugs || e.disease < 0 || e.disease >= n_diseases)
            throw DataError("edge (" + std::to_string(e.drug) + ", " + std::to_string(e.disease) + ") out of range");
        adj.drug_to_diseases[e.drug].push_back(e.disease);
        adj.disease_to_drugs[e.disease].push_back(e.drug);
    }
    return adj;
}

void BipartiteGraph::validate() const {
    if (drug_features.rows() != n_drugs() || disease_embeddings.rows() != n_diseases())
        throw InternalError("bipartite graph: feature rows do not match node counts");
    if (drug_features.cols() != disease_embeddings.cols())
        throw InternalError("bipartite graph: drug and disease dims differ");
    if (edges_reverse.size() != edges_treat.size()) throw InternalError("bipartite graph: reverse edge count differs");
    std::set<Edge> seen;
    for (std::size_t i = 0; i < edges_treat.size(); ++i) {
        const auto& e = edges_treat[i];
        if (e.drug < 0 || e.drug >= n_drugs() || e.disease < 0 || e.disease >= n_diseases())
            throw InternalError("bipartite graph: edge index out of range");
        if (edges_reverse[i] != std::pair<int, int>{e.disease, e.drug})
            throw InternalError("bipartite graph: reverse edges are not the transpose of treat edges");
        if (!seen.insert(e).second) throw InternalError("bipartite graph: duplicate edge");
    }
}

Matrix init_disease_embeddings(int n, Index dim, std::uint64_t seed, double scale) {
    if (n < 1 || dim < 1) throw ConfigError("init_disease_embeddings: n and dim must be >= 1");
    if (!(scale > 0.0)) throw ConfigError("init_disease_embeddings: scale must be positive");
    RngStream rng(seed, "graph/disease-embeddings");
    Matrix m(n, dim);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform_open(-scale, scale);
    return m;
}

BipartiteGraph build_bipartite(const ClusterSubset& cluster, std::uint64_t seed, double disease_scale) {
    if (cluster.links.records.empty())
        throw DataError("cluster " + std::to_string(cluster.cluster_id) + " has no links; graph not built");
    BipartiteGraph g;
    g.cluster_id = cluster.cluster_id;
    g.seed = seed;
    g.drug_ids = cluster.drug_ids;
    g.drug_features = cluster.latent;

    std::map<std::string, int> drug_index;
    for (std::size_t i = 0; i < g.drug_ids.size(); ++i) drug_index.emplace(g.drug_ids[i], static_cast<int>(i));
    std::set<std::string> diseases;
    for (const auto& [drug, disease] : cluster.links.records) diseases.insert(disease);
    g.disease_ids.assign(diseases.begin(), diseases.end());
    std::map<std::string, int> disease_index;
    for (std::size_t i = 0; i < g.disease_ids.size(); ++i) disease_index.emplace(g.disease_ids[i], static_cast<int>(i));

    std::set<Edge> seen;
    for (const auto& [drug, disease] : cluster.links.records) {
        auto it = drug_index.find(drug);
        if (it == drug_index.end())
            throw DataError("cluster " + std::to_string(cluster.cluster_id) + ": link drug '" + drug +
                            "' is not a member of the cluster");
        const Edge e{it->second, disease_index.at(disease)};
        if (seen.insert(e).second) g.edges_treat.push_back(e);
    }
    for (const auto& e : g.edges_treat) g.edges_reverse.emplace_back(e.disease, e.drug);
    g.disease_embeddings = init_disease_embeddings(g.n_diseases(), g.dim(), seed, disease_scale);
    g.adjacency = build_adjacency(g.n_drugs(), g.n_diseases(), g.edges_treat);
    g.validate();
    return g;
}

std::uint64_t edge_key(const Edge& e, int n_diseases) {
    return static_cast<std::uint64_t>(e.drug) * static_cast<std::uint64_t>(n_diseases) +
           static_cast<std::uint64_t>(e.disease);
}

std::unordered_set<std::uint64_t> edge_keys(const EdgeList& edges, int n_diseases) {
    std::unordered_set<std::uint64_t> keys;
    keys.reserve(edges.size() * 2);
    for (const auto& e : edges) keys.insert(edge_key(e, n_diseases));
    return keys;
}

EdgeSplit split_edges(const BipartiteGraph& graph, const SplitRatios& r, std::uint64_t seed) {
    if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");
    const std::size_t n = graph.edges_treat.size();
    if (n < 3) throw DataError("cluster " + std::to_string(graph.cluster_id) + ": fewer than 3 edges cannot be split");
    EdgeList edges = graph.edges_treat;
    RngStream rng(seed, "graph/split");
    rng.shuffle(edges);
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.val + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.test + 1e-9));
    const std::size_t n_train = n - n_val - n_test;
    EdgeSplit s;
    s.train_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train),
                     edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), edges.end());
    return s;
}

EdgeList sample_negatives(const BipartiteGraph& graph, std::size_t count, RngStream& rng,
                          const std::unordered_set<std::uint64_t>& forbidden) {
    const std::uint64_t total =
        static_cast<std::uint64_t>(graph.n_drugs()) * static_cast<std::uint64_t>(graph.n_diseases());
    std::uint64_t blocked = 0;
    for (auto k : forbidden)
        if (k < total) ++blocked;
    const std::uint64_t available = total - blocked;
    if (count > available)
        throw DataError("cluster " + std::to_string(graph.cluster_id) + ": need " + std::to_string(count) +
                        " negative edges but only " + std::to_string(available) + " non-edges exist (deficit " +
                        std::to_string(count - available) + ")");
    EdgeList out;
    out.reserve(count);
    const int nd = graph.n_diseases();
    if (count * 2 <= available) {
        std::unordered_set<std::uint64_t> taken;
        while (out.size() < count) {
            const std::uint64_t k = rng.below(total);
            if (forbidden.count(k) || !taken.insert(k).second) continue;
            out.push_back({static_cast<int>(k / static_cast<std::uint64_t>(nd)), static_cast<int>(k % static_cast<std::uint64_t>(nd))});
        }
    } else {
        // Dense case: enumerate the complement and take a uniform subset.
        std::vector<std::uint64_t> pool;
        pool.reserve(available);
        for (std::uint64_t k = 0; k < total; ++k)
            if (!forbidden.count(k)) pool.push_back(k);
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
            out.push_back({static_cast<int>(pool[i] / static_cast<std::uint64_t>(nd)), static_cast<int>(pool[i] % static_cast<std::uint64_t>(nd))});
        }
    }
    return out;
}

EdgeSplit make_split(const BipartiteGraph& graph, const SplitRatios& ratios, std::uint64_t seed) {
    EdgeSplit s = split_edges(graph, ratios, seed);
    const int nd = graph.n_diseases();
    auto forbidden = edge_keys(graph.edges_treat, nd);
    RngStream rng(seed, "graph/negatives");
    s.val_neg = sample_negatives(graph, s.val_pos.size(), rng, forbidden);
    for (const auto& e : s.val_neg) forbidden.insert(edge_key(e, nd));
    s.test_neg = sample_negatives(graph, s.test_pos.size(), rng, forbidden);
    for (const auto& e : s.test_neg) forbidden.insert(edge_key(e, nd));
    s.train_neg = sample_negatives(graph, s.train_pos.size(), rng, forbidden);
    return s;
}

EdgeSplit permute_split_labels(const EdgeSplit& split, std::uint64_t seed) {
    RngStream rng(seed, "graph/label-permutation");
    EdgeSplit out;
    const auto permute = [&rng](const EdgeList& pos, const EdgeList& neg, EdgeList& new_pos, EdgeList& new_neg) {
        EdgeList pool = pos;
        pool.insert(pool.end(), neg.begin(), neg.end());
        rng.shuffle(pool);
        new_pos.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(pos.size()));
        new_neg.assign(pool.begin() + static_cast<std::ptrdiff_t>(pos.size()), pool.end());
    };
    permute(split.train_pos, split.train_neg, out.train_pos, out.train_neg);
    permute(split.val_pos, split.val_neg, out.val_pos, out.val_neg);
    permute(split.test_pos, split.test_neg, out.test_pos, out.test_neg);
    return out;
}

namespace {
detail::json edges_json(const EdgeList& edges) {
    auto arr = detail::json::array();
    for (const auto& e : edges) arr.push_back({e.drug, e.disease});
    return arr;
}
}  // namespace

void dump_graph(const BipartiteGraph& g, const EdgeSplit* split, const std::filesystem::path& path) {
    detail::json j;
    j["format"] = "decgnn-graph";
    j["version"] = 1;
    j["cluster_id"] = g.cluster_id;
    j["seed"] = g.seed;
    j["drug_ids"] = g.drug_ids;
    j["disease_ids"] = g.disease_ids;
    j["edges_treat"] = edges_json(g.edges_treat);
    auto rev = detail::json::array();
    for (const auto& [s, d] : g.edges_reverse) rev.push_back({s, d});
    j["edges_reverse"] = rev;
    if (split) {
        j["split"] = {{"train_pos", edges_json(split->train_pos)}, {"val_pos", edges_json(split->val_pos)},
                      {"test_pos", edges_json(split->test_pos)},   {"train_neg", edges_json(split->train_neg)},
                      {"val_neg", edges_json(split->val_neg)},     {"test_neg", edges_json(split->test_neg)}};
    }
    detail::write_json(path, j);
}

}  // namespace decgnn
