#include <gtest/gtest.h>

#include "decgnn/errors.hpp"
#include "decgnn/gnn.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace decgnn;

namespace {

// Drugs and diseases in `groups` planted communities; each drug links to
// roughly `density` of its own group's diseases.
BipartiteGraph planted_graph(int groups, int drugs_per, int diseases_per, double density, std::uint64_t seed,
                             Index dim = 8) {
    RngStream rng(seed, "planted");
    Matrix centers(groups, dim);
    for (Index i = 0; i < centers.size(); ++i) centers.data()[i] = rng.normal();
    ClusterSubset c;
    c.cluster_id = 1;
    c.latent.resize(groups * drugs_per, dim);
    for (int g = 0; g < groups; ++g)
        for (int i = 0; i < drugs_per; ++i) {
            const int d = g * drugs_per + i;
            c.drug_ids.push_back("C" + std::to_string(1000 + d));
            for (Index k = 0; k < dim; ++k) c.latent(d, k) = centers(g, k) + 0.2 * rng.normal();
            for (int s = 0; s < diseases_per; ++s)
                if (rng.uniform() < density)
                    c.links.records.emplace_back(c.drug_ids.back(), "D" + std::to_string(100 + g * diseases_per + s));
        }
    return build_bipartite(c, seed);
}

BipartiteGraph tiny_graph() {
    ClusterSubset c;
    c.cluster_id = 2;
    c.drug_ids = {"C1", "C2", "C3", "C4"};
    c.latent = Matrix(4, 3);
    c.latent << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1;
    // C1-D1, C2-D1, C2-D2, C3-D3; C4 isolated.
    c.links.records = {{"C1", "D1"}, {"C2", "D1"}, {"C2", "D2"}, {"C3", "D3"}};
    return build_bipartite(c, 3);
}

}  // namespace

TEST(SageConv, IdentityWeightsCopyTargetPlusMean) {
    SageWeights w = SageWeights::zeros(2, 2, 2);
    w.w_self.setIdentity();
    w.w_neigh.setIdentity();
    Matrix target(2, 2), source(2, 2);
    target << 1, 2, 3, 4;
    source << 0, 1, 1, 0;
    const NeighborLists nb{{0, 1}, {}};
    const Matrix out = sage_conv(target, source, nb, w);
    EXPECT_DOUBLE_EQ(out(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(out(0, 1), 2.5);
    // isolated target sees a zero aggregate
    EXPECT_DOUBLE_EQ(out(1, 0), 3.0);
    EXPECT_DOUBLE_EQ(out(1, 1), 4.0);
}

TEST(SageConv, BackwardMatchesFiniteDifferences) {
    RngStream rng(1, "sage");
    SageWeights w = SageWeights::initialized(3, 4, 5, rng);
    w.bias.setConstant(0.1);
    Matrix target(4, 3), source(3, 4), proj(4, 5);
    for (Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();
    for (Index i = 0; i < source.size(); ++i) source.data()[i] = rng.normal();
    for (Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.normal();
    const NeighborLists nb{{0, 2}, {1}, {}, {0, 1, 2}};
    auto loss = [&] { return sage_conv(target, source, nb, w).cwiseProduct(proj).sum(); };
    SageCache cache;
    sage_conv(target, source, nb, w, &cache);
    const SageGrads g = sage_conv_backward(proj, cache, w);
    const double err = oracle::finite_difference_error(
        loss, {view(w.w_self), view(w.w_neigh), view(w.bias), view(target), view(source)},
        {cview(g.w_self), cview(g.w_neigh), cview(g.bias), cview(g.target), cview(g.source)});
    EXPECT_LE(err, 1e-6);
}

TEST(GnnModel, FullLossGradientMatchesFiniteDifferences) {
    const BipartiteGraph g = planted_graph(2, 5, 3, 0.7, 4, 6);
    RngStream rng(4, "init");
    GnnModel m = GnnModel::initialized(g.dim(), g.disease_embeddings, 8, 2, 0.0, rng);
    for (Index i = 0; i < m.decoder.layers[1].weights.size(); ++i)
        m.decoder.layers[1].weights.data()[i] = 0.3 * rng.normal();
    for (auto& l : m.layers) {
        l.drug_from_disease.bias.setConstant(0.05);
        l.disease_from_drug.bias.setConstant(0.05);
    }
    EdgeList edges(g.edges_treat.begin(), g.edges_treat.begin() + 4);
    edges.push_back({0, g.n_diseases() - 1});
    edges.push_back({g.n_drugs() - 1, 0});
    Vector labels(6);
    labels << 1, 1, 1, 1, 0, 0;
    const auto res = gnn_loss_and_grads(g, m, g.adjacency, edges, labels, false, nullptr);
    auto params = m.parameters();
    const auto grads = res.grads.views();
    ASSERT_EQ(params.size(), grads.size());
    const double err = oracle::finite_difference_error(
        [&] { return gnn_loss_and_grads(g, m, g.adjacency, edges, labels, false, nullptr).loss; },
        {params.begin(), params.end()}, {grads.begin(), grads.end()});
    EXPECT_LE(err, 1e-4);
}

TEST(HeteroForward, InformationTravelsTwoHopsPerTwoLayers) {
    const BipartiteGraph g = tiny_graph();
    auto run = [&](int layers, const BipartiteGraph& graph) {
        RngStream r(5, "hop");
        const GnnModel m = GnnModel::initialized(graph.dim(), graph.disease_embeddings, 6, layers, 0.0, r);
        return hetero_forward(graph, m, graph.adjacency);
    };
    BipartiteGraph moved = g;
    moved.drug_features.row(0) *= 5.0;  // perturb C1
    for (int layers : {1, 2}) {
        const auto a = run(layers, g), b = run(layers, moved);
        // C2 shares D1 with C1: two hops away
        const bool c2_changed = (a.drug.row(1) - b.drug.row(1)).norm() > 1e-12;
        EXPECT_EQ(c2_changed, layers >= 2) << layers;
        // C3 and C4 have no path to C1
        EXPECT_EQ(a.drug.row(2), b.drug.row(2));
        EXPECT_EQ(a.drug.row(3), b.drug.row(3));
    }
}

TEST(GnnModel, ZeroDecoderOutputGivesOneHalf) {
    const BipartiteGraph g = planted_graph(2, 6, 3, 0.8, 6);
    RngStream rng(6, "init");
    const GnnModel m = GnnModel::initialized(g.dim(), g.disease_embeddings, 8, 3, 0.1, rng);
    for (double p : predict_links(m, g, g.edges_treat)) EXPECT_EQ(p, 0.5);
}

TEST(TrainGnn, DeterministicForSeed) {
    const BipartiteGraph g = planted_graph(3, 12, 5, 0.6, 7);
    const EdgeSplit s = make_split(g, {}, 7);
    GnnTrainConfig cfg;
    cfg.hidden_dim = 16;
    cfg.max_epochs = 15;
    cfg.seed = 7;
    const auto a = train_gnn(g, s, cfg), b = train_gnn(g, s, cfg);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].val_roc_auc, b.history[i].val_roc_auc);
    }
    EXPECT_EQ(predict_links(a.model, g, s.test_pos), predict_links(b.model, g, s.test_pos));
}

TEST(TrainGnn, LearnsPlantedCommunities) {
    const BipartiteGraph g = planted_graph(3, 30, 10, 0.6, 8);
    const EdgeSplit s = make_split(g, {}, 8);
    GnnTrainConfig cfg;
    cfg.hidden_dim = 32;
    cfg.max_epochs = 200;
    cfg.patience = 30;
    cfg.seed = 8;
    const auto res = train_gnn(g, s, cfg);
    EXPECT_GE(res.history.at(static_cast<std::size_t>(res.best_epoch)).val_roc_auc, 0.85);
    EXPECT_GE(evaluate_links(res.model, g, s.test_pos, s.test_neg).roc_auc, 0.85);
    // message passing uses training positives only
    EXPECT_EQ(res.model.message_edges, s.train_pos);
}

TEST(TrainGnn, PlateauStopsAfterExactlyTenEpochs) {
    const BipartiteGraph g = planted_graph(2, 10, 4, 0.7, 9);
    const EdgeSplit s = make_split(g, {}, 9);
    GnnTrainConfig cfg;
    cfg.lr = 1e-300;
    cfg.hidden_dim = 8;
    cfg.seed = 9;
    const auto res = train_gnn(g, s, cfg);
    EXPECT_TRUE(res.early_stopped);
    EXPECT_EQ(res.best_epoch, 0);
    EXPECT_EQ(res.history.size(), 11u);
}

TEST(TrainGnn, RejectsInvalidConfig) {
    GnnTrainConfig cfg;
    cfg.hidden_dim = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.dropout = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PredictLinks, LengthRangeAndRoundTrip) {
    testutil::TempDir dir("gnn");
    const BipartiteGraph g = planted_graph(2, 10, 4, 0.7, 10);
    const EdgeSplit s = make_split(g, {}, 10);
    GnnTrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.max_epochs = 5;
    cfg.seed = 10;
    const auto res = train_gnn(g, s, cfg);
    EdgeList all;
    for (int d = 0; d < g.n_drugs(); ++d)
        for (int e = 0; e < g.n_diseases(); ++e) all.push_back({d, e});
    const auto p = predict_links(res.model, g, all);
    ASSERT_EQ(p.size(), all.size());
    for (double v : p) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    save_gnn(res.model, cfg, dir / "m.json");
    GnnTrainConfig back_cfg;
    const GnnModel back = load_gnn(dir / "m.json", &back_cfg);
    EXPECT_EQ(predict_links(back, g, all), p);
    EXPECT_EQ(back.message_edges, res.model.message_edges);
    EXPECT_EQ(back_cfg.hidden_dim, 8);
    save_history(res.history, dir / "h.csv");
    EXPECT_EQ(testutil::read_file(dir / "h.csv").rfind("epoch,train_loss,val_f1,val_roc_auc\n", 0), 0u);
}
