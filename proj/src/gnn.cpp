#include "decgnn/gnn.hpp"

#include <cmath>
#include <numeric>

#include "decgnn/csv.hpp"
#include "decgnn/early_stopping.hpp"
#include "decgnn/errors.hpp"
#include "json_io.hpp"

namespace decgnn {

SageWeights SageWeights::initialized(Index target_dim, Index source_dim, Index out_dim, RngStream& rng) {
    SageWeights w = zeros(target_dim, source_dim, out_dim);
    const double a = std::sqrt(6.0 / static_cast<double>(target_dim + source_dim));
    for (Index i = 0; i < w.w_self.size(); ++i) w.w_self.data()[i] = rng.uniform_open(-a, a);
    for (Index i = 0; i < w.w_neigh.size(); ++i) w.w_neigh.data()[i] = rng.uniform_open(-a, a);
    return w;
}

SageWeights SageWeights::zeros(Index target_dim, Index source_dim, Index out_dim) {
    if (target_dim < 1 || source_dim < 1 || out_dim < 1) throw ConfigError("sage weights: dims must be >= 1");
    return {Matrix::Zero(out_dim, target_dim), Matrix::Zero(out_dim, source_dim), Vector::Zero(out_dim)};
}

Matrix sage_conv(const Matrix& target, const Matrix& source, const NeighborLists& neighbors, const SageWeights& w,
                 SageCache* cache) {
    if (target.cols() != w.target_dim() || source.cols() != w.source_dim())
        throw ConfigError("sage_conv: feature dims (" + std::to_string(target.cols()) + ", " +
                          std::to_string(source.cols()) + ") do not match weights (" +
                          std::to_string(w.target_dim()) + ", " + std::to_string(w.source_dim()) + ")");
    if (static_cast<Index>(neighbors.size()) != target.rows())
        throw ConfigError("sage_conv: neighbour list count differs from target rows");
    Matrix agg = Matrix::Zero(target.rows(), source.cols());
    for (Index v = 0; v < target.rows(); ++v) {
        const auto& nb = neighbors[static_cast<std::size_t>(v)];
        if (nb.empty()) continue;
        for (int u : nb) {
            if (u < 0 || u >= source.rows()) throw DataError("sage_conv: neighbour index out of range");
            agg.row(v) += source.row(u);
        }
        agg.row(v) /= static_cast<double>(nb.size());
    }
    Matrix out = target * w.w_self.transpose() + agg * w.w_neigh.transpose();
    out.rowwise() += w.bias.transpose();
    if (cache) {
        cache->target = target;
        cache->aggregate = std::move(agg);
        cache->neighbors = &neighbors;
        cache->n_source = source.rows();
    }
    return out;
}

SageGrads sage_conv_backward(const Matrix& g, const SageCache& cache, const SageWeights& w) {
    if (!cache.neighbors || g.rows() != cache.target.rows() || g.cols() != w.out_dim())
        throw InternalError("sage_conv_backward: cache does not match gradient");
    SageGrads r;
    r.w_self = g.transpose() * cache.target;
    r.w_neigh = g.transpose() * cache.aggregate;
    r.bias = g.colwise().sum().transpose();
    r.target = g * w.w_self;
    const Matrix g_agg = g * w.w_neigh;
    r.source = Matrix::Zero(cache.n_source, w.source_dim());
    const auto& nbrs = *cache.neighbors;
    for (std::size_t v = 0; v < nbrs.size(); ++v) {
        if (nbrs[v].empty()) continue;
        const double inv = 1.0 / static_cast<double>(nbrs[v].size());
        for (int u : nbrs[v]) r.source.row(u) += inv * g_agg.row(static_cast<Index>(v));
    }
    return r;
}

void GnnTrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("gnn lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("gnn weight_decay must be >= 0");
    if (hidden_dim < 1) throw ConfigError("gnn hidden_dim must be >= 1");
    if (n_layers < 1) throw ConfigError("gnn n_layers must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("gnn dropout must be in [0, 1)");
    if (max_epochs < 1) throw ConfigError("gnn max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("gnn patience must be >= 1");
    if (!(min_delta >= 0.0)) throw ConfigError("gnn min_delta must be >= 0");
}

GnnModel GnnModel::initialized(Index drug_dim, const Matrix& disease_init, int hidden_dim, int n_layers,
                               double dropout, RngStream& rng) {
    if (hidden_dim < 1 || n_layers < 1) throw ConfigError("gnn: hidden_dim and n_layers must be >= 1");
    if (disease_init.cols() != drug_dim) throw ConfigError("gnn: disease embedding dim must equal drug feature dim");
    GnnModel m;
    m.hidden_dim = hidden_dim;
    m.dropout = dropout;
    m.disease_embeddings = disease_init;
    Index d_drug = drug_dim, d_dis = drug_dim;
    for (int l = 0; l < n_layers; ++l) {
        HeteroLayer layer;
        layer.drug_from_disease = SageWeights::initialized(d_drug, d_dis, hidden_dim, rng);
        layer.disease_from_drug = SageWeights::initialized(d_dis, d_drug, hidden_dim, rng);
        m.layers.push_back(std::move(layer));
        d_drug = d_dis = hidden_dim;
    }
    m.decoder.layers.push_back(DenseLayer::initialized(2 * hidden_dim, hidden_dim, Activation::ReLU, rng));
    m.decoder.layers.push_back(DenseLayer::zeros(hidden_dim, 1, Activation::Identity));
    return m;
}

std::vector<ParamView> GnnModel::parameters() {
    std::vector<ParamView> p;
    for (auto& l : layers)
        for (SageWeights* w : {&l.drug_from_disease, &l.disease_from_drug}) {
            p.push_back(view(w->w_self));
            p.push_back(view(w->w_neigh));
            p.push_back(view(w->bias));
        }
    for (auto v : decoder.parameters()) p.push_back(v);
    p.push_back(view(disease_embeddings));
    return p;
}

std::size_t GnnModel::parameter_count() const {
    std::size_t n = decoder.parameter_count() + static_cast<std::size_t>(disease_embeddings.size());
    for (const auto& l : layers)
        for (const SageWeights* w : {&l.drug_from_disease, &l.disease_from_drug})
            n += static_cast<std::size_t>(w->w_self.size() + w->w_neigh.size() + w->bias.size());
    return n;
}

void GnnModel::validate(Index drug_dim) const {
    if (layers.empty()) throw ConfigError("gnn model has no layers");
    Index d_drug = drug_dim, d_dis = disease_embeddings.cols();
    for (const auto& l : layers) {
        if (l.drug_from_disease.target_dim() != d_drug || l.drug_from_disease.source_dim() != d_dis ||
            l.disease_from_drug.target_dim() != d_dis || l.disease_from_drug.source_dim() != d_drug)
            throw ConfigError("gnn model: layer dims do not chain");
        d_drug = l.drug_from_disease.out_dim();
        d_dis = l.disease_from_drug.out_dim();
    }
    if (decoder.layers.size() != 2 || decoder.in_dim() != d_drug + d_dis || decoder.out_dim() != 1)
        throw ConfigError("gnn model: decoder input must match the concatenated embedding width");
}

NodeEmbeddings hetero_forward(const BipartiteGraph& graph, const GnnModel& model, const Adjacency& messages,
                              HeteroCache* cache) {
    if (model.layers.empty()) throw ConfigError("hetero_forward: model has no layers");
    if (model.disease_embeddings.rows() != graph.n_diseases())
        throw ConfigError("hetero_forward: model disease count differs from graph");
    const int L = model.n_layers();
    if (cache) {
        cache->to_drug.assign(static_cast<std::size_t>(L), {});
        cache->to_disease.assign(static_cast<std::size_t>(L), {});
        cache->drug_pre.assign(static_cast<std::size_t>(L), {});
        cache->disease_pre.assign(static_cast<std::size_t>(L), {});
    }
    Matrix h_drug = graph.drug_features;
    Matrix h_dis = model.disease_embeddings;
    for (int l = 0; l < L; ++l) {
        const auto& layer = model.layers[static_cast<std::size_t>(l)];
        const auto li = static_cast<std::size_t>(l);
        Matrix next_drug = sage_conv(h_drug, h_dis, messages.drug_to_diseases, layer.drug_from_disease,
                                     cache ? &cache->to_drug[li] : nullptr);
        Matrix next_dis = sage_conv(h_dis, h_drug, messages.disease_to_drugs, layer.disease_from_drug,
                                    cache ? &cache->to_disease[li] : nullptr);
        if (l + 1 < L) {
            if (cache) {
                cache->drug_pre[li] = next_drug;
                cache->disease_pre[li] = next_dis;
            }
            next_drug = next_drug.cwiseMax(0.0);
            next_dis = next_dis.cwiseMax(0.0);
        }
        h_drug = std::move(next_drug);
        h_dis = std::move(next_dis);
    }
    return {std::move(h_drug), std::move(h_dis)};
}

namespace {

Matrix gather_pairs(const NodeEmbeddings& emb, const EdgeList& edges) {
    const Index hd = emb.drug.cols(), hs = emb.disease.cols();
    Matrix x(static_cast<Index>(edges.size()), hd + hs);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.drug < 0 || e.drug >= emb.drug.rows() || e.disease < 0 || e.disease >= emb.disease.rows())
            throw DataError("edge (" + std::to_string(e.drug) + ", " + std::to_string(e.disease) +
                            ") out of range for the graph");
        const auto r = static_cast<Index>(i);
        x.row(r).head(hd) = emb.drug.row(e.drug);
        x.row(r).tail(hs) = emb.disease.row(e.disease);
    }
    return x;
}

Vector decode_matrix(const Matrix& x, const GnnModel& model, bool training, RngStream* rng, DecoderCache* cache) {
    if (training && model.dropout > 0.0 && !rng) throw InternalError("decode: training mode needs an rng");
    if (cache) cache->dense.assign(2, {});
    const Matrix h = dense_forward(x, model.decoder.layers[0], cache ? &cache->dense[0] : nullptr);
    Matrix dropped;
    if (training && model.dropout > 0.0) {
        auto d = dropout(h, model.dropout, *rng, true);
        dropped = std::move(d.output);
        if (cache) cache->dropout_mask = std::move(d.mask);
    } else {
        dropped = h;
        if (cache) cache->dropout_mask = Matrix::Ones(h.rows(), h.cols());
    }
    const Matrix out = dense_forward(dropped, model.decoder.layers[1], cache ? &cache->dense[1] : nullptr);
    return out.col(0);
}

}  // namespace

Vector decode_edges(const NodeEmbeddings& emb, const EdgeList& edges, const GnnModel& model, bool training,
                    RngStream* rng, DecoderCache* cache) {
    return decode_matrix(gather_pairs(emb, edges), model, training, rng, cache);
}

double decode_edge(const Vector& drug_emb, const Vector& disease_emb, const GnnModel& model, bool training,
                   RngStream* rng) {
    Matrix x(1, drug_emb.size() + disease_emb.size());
    x.row(0).head(drug_emb.size()) = drug_emb.transpose();
    x.row(0).tail(disease_emb.size()) = disease_emb.transpose();
    if (x.cols() != model.decoder.in_dim()) throw ConfigError("decode_edge: embedding widths do not match decoder");
    return decode_matrix(x, model, training, rng, nullptr)(0);
}

std::vector<GradView> GnnGrads::views() const {
    std::vector<GradView> v;
    for (std::size_t l = 0; l < drug_from_disease.size(); ++l)
        for (const SageGrads* g : {&drug_from_disease[l], &disease_from_drug[l]}) {
            v.push_back(cview(g->w_self));
            v.push_back(cview(g->w_neigh));
            v.push_back(cview(g->bias));
        }
    for (auto g : LayerStack::grad_views(decoder)) v.push_back(g);
    v.push_back(cview(disease_embeddings));
    return v;
}

GnnLoss gnn_loss_and_grads(const BipartiteGraph& graph, const GnnModel& model, const Adjacency& messages,
                           const EdgeList& edges, const Vector& labels, bool training, RngStream* rng) {
    if (static_cast<Index>(edges.size()) != labels.size()) throw InternalError("gnn loss: edge/label count mismatch");
    HeteroCache hc;
    const NodeEmbeddings emb = hetero_forward(graph, model, messages, &hc);
    DecoderCache dc;
    const Vector logits = decode_edges(emb, edges, model, training, rng, &dc);
    const BceResult bce = bce_with_logits(logits, labels);

    GnnLoss out;
    out.loss = bce.loss;
    GnnGrads& G = out.grads;
    G.decoder.resize(2);
    Matrix g_out(logits.size(), 1);
    g_out.col(0) = bce.grad;
    G.decoder[1] = dense_backward(g_out, dc.dense[1], model.decoder.layers[1]);
    G.decoder[0] = dense_backward(G.decoder[1].input.cwiseProduct(dc.dropout_mask), dc.dense[0],
                                  model.decoder.layers[0]);
    const Matrix& gx = G.decoder[0].input;

    const Index hd = emb.drug.cols(), hs = emb.disease.cols();
    Matrix g_drug = Matrix::Zero(emb.drug.rows(), hd);
    Matrix g_dis = Matrix::Zero(emb.disease.rows(), hs);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto r = static_cast<Index>(i);
        g_drug.row(edges[i].drug) += gx.row(r).head(hd);
        g_dis.row(edges[i].disease) += gx.row(r).tail(hs);
    }

    const int L = model.n_layers();
    G.drug_from_disease.resize(static_cast<std::size_t>(L));
    G.disease_from_drug.resize(static_cast<std::size_t>(L));
    for (int l = L - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        if (l + 1 < L) {
            g_drug = g_drug.cwiseProduct((hc.drug_pre[li].array() > 0.0).cast<double>().matrix());
            g_dis = g_dis.cwiseProduct((hc.disease_pre[li].array() > 0.0).cast<double>().matrix());
        }
        const auto& layer = model.layers[li];
        G.drug_from_disease[li] = sage_conv_backward(g_drug, hc.to_drug[li], layer.drug_from_disease);
        G.disease_from_drug[li] = sage_conv_backward(g_dis, hc.to_disease[li], layer.disease_from_drug);
        g_drug = G.drug_from_disease[li].target + G.disease_from_drug[li].source;
        g_dis = G.disease_from_drug[li].target + G.drug_from_disease[li].source;
    }
    G.disease_embeddings = std::move(g_dis);
    return out;
}

namespace {

std::vector<double> probabilities(const GnnModel& model, const BipartiteGraph& graph, const Adjacency& messages,
                                  const EdgeList& edges) {
    const NodeEmbeddings emb = hetero_forward(graph, model, messages);
    const Vector logits = decode_edges(emb, edges, model, false, nullptr);
    std::vector<double> p(static_cast<std::size_t>(logits.size()));
    for (Index i = 0; i < logits.size(); ++i) p[static_cast<std::size_t>(i)] = sigmoid(logits(i));
    return p;
}

EvalReport evaluate_with(const GnnModel& model, const BipartiteGraph& graph, const Adjacency& messages,
                         const EdgeList& pos, const EdgeList& neg) {
    EdgeList edges = pos;
    edges.insert(edges.end(), neg.begin(), neg.end());
    std::vector<int> labels(pos.size(), 1);
    labels.resize(edges.size(), 0);
    const auto p = probabilities(model, graph, messages, edges);
    return evaluate(p, labels);
}

}  // namespace

GnnTrainResult train_gnn(const BipartiteGraph& graph, const EdgeSplit& split, const GnnTrainConfig& cfg) {
    cfg.validate();
    if (split.train_pos.empty() || split.val_pos.empty())
        throw DataError("cluster " + std::to_string(graph.cluster_id) +
                        ": training and validation splits must both contain edges");
    if (split.train_neg.size() != split.train_pos.size() || split.val_neg.size() != split.val_pos.size())
        throw DataError("train_gnn: negative sets must match their positive counts");

    RngStream root(cfg.seed, "gnn");
    RngStream init_rng = root.derive("init");
    RngStream dropout_rng = root.derive("dropout");
    RngStream neg_rng = root.derive("negatives");

    GnnTrainResult res;
    res.model = GnnModel::initialized(graph.dim(), graph.disease_embeddings, cfg.hidden_dim, cfg.n_layers,
                                      cfg.dropout, init_rng);
    GnnModel& model = res.model;
    model.message_edges = split.train_pos;
    const Adjacency messages = build_adjacency(graph.n_drugs(), graph.n_diseases(), split.train_pos);

    const int nd = graph.n_diseases();
    auto forbidden = edge_keys(graph.edges_treat, nd);
    for (const auto* list : {&split.val_neg, &split.test_neg})
        for (const auto& e : *list) forbidden.insert(edge_key(e, nd));

    AdamState adam;
    adam.lr = cfg.lr;
    adam.weight_decay = cfg.weight_decay;
    adam.decoupled_weight_decay = cfg.decoupled_weight_decay;
    adam.validate();
    EarlyStopper stopper(cfg.patience, cfg.min_delta, EarlyStopper::Goal::Maximize);
    GnnModel best = model;

    const std::size_t n_pos = split.train_pos.size();
    EdgeList train_neg = split.train_neg;
    EdgeList batch;
    Vector labels(static_cast<Index>(2 * n_pos));
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (epoch > 0 && cfg.resample_negatives) train_neg = sample_negatives(graph, n_pos, neg_rng, forbidden);
        batch = split.train_pos;
        batch.insert(batch.end(), train_neg.begin(), train_neg.end());
        labels.head(static_cast<Index>(n_pos)).setOnes();
        labels.tail(static_cast<Index>(n_pos)).setZero();

        GnnLoss step = gnn_loss_and_grads(graph, model, messages, batch, labels, true, &dropout_rng);
        if (!std::isfinite(step.loss))
            throw TrainingError("cluster " + std::to_string(graph.cluster_id) + ": gnn loss is not finite", epoch);
        adam_step(model.parameters(), step.grads.views(), adam, epoch);

        const EvalReport val = evaluate_with(model, graph, messages, split.val_pos, split.val_neg);
        res.history.push_back({epoch, step.loss, val.f1, val.roc_auc});
        if (stopper.observe(val.roc_auc)) best = model;
        if (stopper.should_stop()) {
            res.early_stopped = true;
            break;
        }
    }
    res.best_epoch = stopper.best_index();
    res.model = std::move(best);
    return res;
}

std::vector<double> predict_links(const GnnModel& model, const BipartiteGraph& graph, const EdgeList& candidates) {
    model.validate(graph.dim());
    const Adjacency messages = build_adjacency(graph.n_drugs(), graph.n_diseases(), model.message_edges);
    if (candidates.empty()) return {};
    return probabilities(model, graph, messages, candidates);
}

EvalReport evaluate_links(const GnnModel& model, const BipartiteGraph& graph, const EdgeList& positives,
                          const EdgeList& negatives) {
    const Adjacency messages = build_adjacency(graph.n_drugs(), graph.n_diseases(), model.message_edges);
    return evaluate_with(model, graph, messages, positives, negatives);
}

namespace {

detail::json sage_to_json(const SageWeights& w) {
    return {{"w_self", detail::matrix_to_json(w.w_self)},
            {"w_neigh", detail::matrix_to_json(w.w_neigh)},
            {"bias", detail::vector_to_json(w.bias)}};
}

SageWeights sage_from_json(const detail::json& j) {
    SageWeights w{detail::matrix_from_json(j.at("w_self")), detail::matrix_from_json(j.at("w_neigh")),
                  detail::vector_from_json(j.at("bias"))};
    if (w.w_neigh.rows() != w.w_self.rows() || w.bias.size() != w.w_self.rows())
        throw DataError("gnn checkpoint: inconsistent sage weight shapes");
    return w;
}

}  // namespace

void save_gnn(const GnnModel& model, const GnnTrainConfig& cfg, const std::filesystem::path& path) {
    detail::json j;
    j["format"] = "decgnn-gnn";
    j["version"] = 1;
    j["config"] = {{"lr", cfg.lr},
                   {"weight_decay", cfg.weight_decay},
                   {"decoupled_weight_decay", cfg.decoupled_weight_decay},
                   {"hidden_dim", cfg.hidden_dim},
                   {"n_layers", cfg.n_layers},
                   {"dropout", cfg.dropout},
                   {"max_epochs", cfg.max_epochs},
                   {"patience", cfg.patience},
                   {"min_delta", cfg.min_delta},
                   {"seed", cfg.seed},
                   {"resample_negatives", cfg.resample_negatives}};
    j["hidden_dim"] = model.hidden_dim;
    j["dropout"] = model.dropout;
    auto layers = detail::json::array();
    for (const auto& l : model.layers)
        layers.push_back({{"drug_from_disease", sage_to_json(l.drug_from_disease)},
                          {"disease_from_drug", sage_to_json(l.disease_from_drug)}});
    j["layers"] = layers;
    j["disease_embeddings"] = detail::matrix_to_json(model.disease_embeddings);
    j["decoder"] = detail::stack_to_json(model.decoder);
    auto edges = detail::json::array();
    for (const auto& e : model.message_edges) edges.push_back({e.drug, e.disease});
    j["message_edges"] = edges;
    detail::write_json(path, j);
}

GnnModel load_gnn(const std::filesystem::path& path, GnnTrainConfig* cfg) {
    const auto j = detail::read_json(path);
    try {
        if (j.at("format") != "decgnn-gnn" || j.at("version") != 1)
            throw DataError(path.string() + ": not a version-1 gnn checkpoint");
        GnnModel m;
        m.hidden_dim = j.at("hidden_dim").get<int>();
        m.dropout = j.at("dropout").get<double>();
        for (const auto& l : j.at("layers"))
            m.layers.push_back({sage_from_json(l.at("drug_from_disease")), sage_from_json(l.at("disease_from_drug"))});
        m.disease_embeddings = detail::matrix_from_json(j.at("disease_embeddings"));
        m.decoder = detail::stack_from_json(j.at("decoder"));
        for (const auto& e : j.at("message_edges")) m.message_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        if (m.layers.empty()) throw DataError(path.string() + ": gnn checkpoint has no layers");
        m.validate(m.layers.front().drug_from_disease.target_dim());
        if (cfg) {
            const auto& c = j.at("config");
            cfg->lr = c.at("lr").get<double>();
            cfg->weight_decay = c.at("weight_decay").get<double>();
            cfg->decoupled_weight_decay = c.at("decoupled_weight_decay").get<bool>();
            cfg->hidden_dim = c.at("hidden_dim").get<int>();
            cfg->n_layers = c.at("n_layers").get<int>();
            cfg->dropout = c.at("dropout").get<double>();
            cfg->max_epochs = c.at("max_epochs").get<int>();
            cfg->patience = c.at("patience").get<int>();
            cfg->min_delta = c.at("min_delta").get<double>();
            cfg->seed = c.at("seed").get<std::uint64_t>();
            cfg->resample_negatives = c.at("resample_negatives").get<bool>();
        }
        return m;
    } catch (const detail::json::exception& e) {
        throw DataError(path.string() + ": malformed gnn checkpoint: " + e.what());
    }
}

void save_history(const std::vector<GnnEpoch>& history, const std::filesystem::path& path) {
    std::string out = "epoch,train_loss,val_f1,val_roc_auc\n";
    for (const auto& h : history)
        out += std::to_string(h.epoch) + "," + csv::format_double(h.train_loss) + "," + csv::format_double(h.val_f1) +
               "," + csv::format_double(h.val_roc_auc) + "\n";
    csv::write_text(path, out);
}

}  // namespace decgnn
