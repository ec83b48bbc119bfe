#include "decgnn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <map>
#include <numeric>
#include <set>

#include "decgnn/csv.hpp"
#include "decgnn/dec.hpp"
#include "decgnn/errors.hpp"
#include "json_io.hpp"

namespace decgnn {

using detail::json;
namespace fs = std::filesystem;

GnnTrainConfig GridVariation::apply(const GnnTrainConfig& base) const {
    GnnTrainConfig c = base;
    if (n_layers) c.n_layers = *n_layers;
    if (lr) c.lr = *lr;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (dropout) c.dropout = *dropout;
    if (hidden_dim) c.hidden_dim = *hidden_dim;
    return c;
}

GridSpec GridSpec::standard() {
    GridSpec g;
    g.base = {"base", 3, 1e-3, 0.0, 0.1, 32};
    g.variations.push_back({"baseline", {}, {}, {}, {}, {}});
    for (int l : {1, 2, 4, 5}) g.variations.push_back({"n_layers=" + std::to_string(l), l, {}, {}, {}, {}});
    for (double lr : {0.01, 0.005}) g.variations.push_back({"lr=" + csv::format_double(lr), {}, lr, {}, {}, {}});
    for (double wd : {1e-3, 1e-4, 1e-5, 1e-6})
        g.variations.push_back({"weight_decay=" + csv::format_double(wd), {}, {}, wd, {}, {}});
    for (double d : {0.2, 0.3, 0.4, 0.5})
        g.variations.push_back({"dropout=" + csv::format_double(d), {}, {}, {}, d, {}});
    for (int h : {16, 64, 128}) g.variations.push_back({"hidden_dim=" + std::to_string(h), {}, {}, {}, {}, h});
    return g;
}

void PipelineConfig::validate() const {
    if (config_version != kConfigVersion)
        throw ConfigError("unsupported config_version " + std::to_string(config_version) + " (expected " +
                          std::to_string(kConfigVersion) + ")");
    if (output_dir.empty()) throw ConfigError("paths.output_dir must not be empty");
    if (!features_path.empty() && links_path.empty())
        throw ConfigError("paths.links is required when paths.features is set");
    if (!joined_path.empty() && !features_path.empty())
        throw ConfigError("set either paths.joined or paths.features, not both");
    synth.validate();
    if (!(completeness_threshold >= 0.0 && completeness_threshold <= 1.0))
        throw ConfigError("preprocess.completeness_threshold must be in [0, 1]");
    if (knn_k < 1) throw ConfigError("preprocess.knn_k must be >= 1");
    if (latent_dim < 1) throw ConfigError("autoencoder.latent_dim must be >= 1");
    if (ae_lr_grid.empty()) throw ConfigError("autoencoder.lr_grid must not be empty");
    for (double lr : ae_lr_grid)
        if (!(lr > 0.0)) throw ConfigError("autoencoder.lr_grid entries must be positive");
    ae.validate();
    if (dec_k == 1 || dec_k < 0) throw ConfigError("dec.k must be 0 (sweep) or >= 2");
    if (sweep_k_min < 2 || sweep_k_max < sweep_k_min) throw ConfigError("dec sweep range must satisfy 2 <= k_min <= k_max");
    if (!(dec_lr > 0.0)) throw ConfigError("dec.lr must be positive");
    if (dec_update_interval < 1) throw ConfigError("dec.update_interval must be >= 1");
    if (dec_max_epochs < 1) throw ConfigError("dec.max_epochs must be >= 1");
    gnn.validate();
    if (split.train <= 0 || split.val <= 0 || split.test <= 0 ||
        std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
        throw ConfigError("gnn.split ratios must be positive and sum to 1");
    if (!(disease_scale > 0.0)) throw ConfigError("gnn.disease_scale must be positive");
    grid.base.apply(gnn).validate();
    for (const auto& v : grid.variations) v.apply(grid.base.apply(gnn)).validate();
    if (!(probability_threshold > 0.5 && probability_threshold < 1.0))
        throw ConfigError("ranking.probability_threshold must be in (0.5, 1)");
    if (threads < 1) throw ConfigError("execution.threads must be >= 1");
    std::set<int> seen;
    for (int c : cluster_order)
        if (!seen.insert(c).second) throw ConfigError("execution.cluster_order repeats cluster " + std::to_string(c));
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
    }
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key)) return;
    T v{};
    read(j, key, v, where);
    out = v;
}

json variation_to_json(const GridVariation& v) {
    json j;
    j["name"] = v.name;
    if (v.n_layers) j["n_layers"] = *v.n_layers;
    if (v.lr) j["lr"] = *v.lr;
    if (v.weight_decay) j["weight_decay"] = *v.weight_decay;
    if (v.dropout) j["dropout"] = *v.dropout;
    if (v.hidden_dim) j["hidden_dim"] = *v.hidden_dim;
    return j;
}

GridVariation variation_from_json(const json& j, const std::string& where) {
    check_keys(j, {"name", "n_layers", "lr", "weight_decay", "dropout", "hidden_dim"}, where);
    GridVariation v;
    read(j, "name", v.name, where);
    read_opt(j, "n_layers", v.n_layers, where);
    read_opt(j, "lr", v.lr, where);
    read_opt(j, "weight_decay", v.weight_decay, where);
    read_opt(j, "dropout", v.dropout, where);
    read_opt(j, "hidden_dim", v.hidden_dim, where);
    return v;
}

json to_json(const PipelineConfig& c) {
    json j;
    j["config_version"] = c.config_version;
    j["master_seed"] = c.master_seed;
    j["paths"] = {{"features", c.features_path},
                  {"links", c.links_path},
                  {"joined", c.joined_path},
                  {"output_dir", c.output_dir}};
    j["synth"] = {{"n_clusters", c.synth.n_clusters},
                  {"drugs_per_cluster", c.synth.drugs_per_cluster},
                  {"diseases_per_cluster", c.synth.diseases_per_cluster},
                  {"feature_dim", c.synth.feature_dim},
                  {"noise_sigma", c.synth.noise_sigma},
                  {"link_density_within", c.synth.link_density_within},
                  {"link_density_cross", c.synth.link_density_cross},
                  {"missing_rate", c.synth.missing_rate},
                  {"seed", c.synth.seed}};
    j["preprocess"] = {{"completeness_threshold", c.completeness_threshold}, {"knn_k", c.knn_k}};
    j["autoencoder"] = {{"latent_dim", c.latent_dim},
                        {"lr_grid", c.ae_lr_grid},
                        {"max_epochs", c.ae.max_epochs},
                        {"patience", c.ae.patience},
                        {"min_improvement", c.ae.min_improvement},
                        {"batch_size", c.ae.batch_size},
                        {"full_batch_limit", c.ae.full_batch_limit}};
    j["dec"] = {{"k", c.dec_k},
                {"sweep_k_min", c.sweep_k_min},
                {"sweep_k_max", c.sweep_k_max},
                {"k_min_useful", c.k_min_useful},
                {"lr", c.dec_lr},
                {"update_interval", c.dec_update_interval},
                {"tol", c.dec_tol},
                {"max_epochs", c.dec_max_epochs}};
    j["gnn"] = {{"lr", c.gnn.lr},
                {"weight_decay", c.gnn.weight_decay},
                {"decoupled_weight_decay", c.gnn.decoupled_weight_decay},
                {"hidden_dim", c.gnn.hidden_dim},
                {"n_layers", c.gnn.n_layers},
                {"dropout", c.gnn.dropout},
                {"max_epochs", c.gnn.max_epochs},
                {"patience", c.gnn.patience},
                {"min_delta", c.gnn.min_delta},
                {"resample_negatives", c.gnn.resample_negatives},
                {"disease_scale", c.disease_scale},
                {"split", {c.split.train, c.split.val, c.split.test}}};
    json vars = json::array();
    for (const auto& v : c.grid.variations) vars.push_back(variation_to_json(v));
    j["grid"] = {{"base", variation_to_json(c.grid.base)}, {"variations", vars}};
    j["ranking"] = {{"probability_threshold", c.probability_threshold}};
    j["execution"] = {{"threads", c.threads}, {"cluster_order", c.cluster_order}};
    return j;
}

PipelineConfig from_json(const json& j) {
    check_keys(j, {"config_version", "master_seed", "paths", "synth", "preprocess", "autoencoder", "dec", "gnn", "grid",
                   "ranking", "execution"},
               "");
    PipelineConfig c;
    if (!j.contains("config_version")) throw ConfigError("config: config_version is required");
    read(j, "config_version", c.config_version, "");
    read(j, "master_seed", c.master_seed, "");
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        check_keys(p, {"features", "links", "joined", "output_dir"}, "paths");
        read(p, "features", c.features_path, "paths");
        read(p, "links", c.links_path, "paths");
        read(p, "joined", c.joined_path, "paths");
        read(p, "output_dir", c.output_dir, "paths");
    }
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        check_keys(s, {"n_clusters", "drugs_per_cluster", "diseases_per_cluster", "feature_dim", "noise_sigma",
                       "link_density_within", "link_density_cross", "missing_rate", "seed"},
                   "synth");
        read(s, "n_clusters", c.synth.n_clusters, "synth");
        read(s, "drugs_per_cluster", c.synth.drugs_per_cluster, "synth");
        read(s, "diseases_per_cluster", c.synth.diseases_per_cluster, "synth");
        read(s, "feature_dim", c.synth.feature_dim, "synth");
        read(s, "noise_sigma", c.synth.noise_sigma, "synth");
        read(s, "link_density_within", c.synth.link_density_within, "synth");
        read(s, "link_density_cross", c.synth.link_density_cross, "synth");
        read(s, "missing_rate", c.synth.missing_rate, "synth");
        read(s, "seed", c.synth.seed, "synth");
    }
    if (j.contains("preprocess")) {
        const auto& s = j["preprocess"];
        check_keys(s, {"completeness_threshold", "knn_k"}, "preprocess");
        read(s, "completeness_threshold", c.completeness_threshold, "preprocess");
        read(s, "knn_k", c.knn_k, "preprocess");
    }
    if (j.contains("autoencoder")) {
        const auto& s = j["autoencoder"];
        check_keys(s, {"latent_dim", "lr_grid", "max_epochs", "patience", "min_improvement", "batch_size",
                       "full_batch_limit"},
                   "autoencoder");
        read(s, "latent_dim", c.latent_dim, "autoencoder");
        read(s, "lr_grid", c.ae_lr_grid, "autoencoder");
        read(s, "max_epochs", c.ae.max_epochs, "autoencoder");
        read(s, "patience", c.ae.patience, "autoencoder");
        read(s, "min_improvement", c.ae.min_improvement, "autoencoder");
        read(s, "batch_size", c.ae.batch_size, "autoencoder");
        read(s, "full_batch_limit", c.ae.full_batch_limit, "autoencoder");
    }
    if (j.contains("dec")) {
        const auto& s = j["dec"];
        check_keys(s, {"k", "sweep_k_min", "sweep_k_max", "k_min_useful", "lr", "update_interval", "tol", "max_epochs"},
                   "dec");
        read(s, "k", c.dec_k, "dec");
        read(s, "sweep_k_min", c.sweep_k_min, "dec");
        read(s, "sweep_k_max", c.sweep_k_max, "dec");
        read(s, "k_min_useful", c.k_min_useful, "dec");
        read(s, "lr", c.dec_lr, "dec");
        read(s, "update_interval", c.dec_update_interval, "dec");
        read(s, "tol", c.dec_tol, "dec");
        read(s, "max_epochs", c.dec_max_epochs, "dec");
    }
    if (j.contains("gnn")) {
        const auto& s = j["gnn"];
        check_keys(s, {"lr", "weight_decay", "decoupled_weight_decay", "hidden_dim", "n_layers", "dropout",
                       "max_epochs", "patience", "min_delta", "resample_negatives", "disease_scale", "split"},
                   "gnn");
        read(s, "lr", c.gnn.lr, "gnn");
        read(s, "weight_decay", c.gnn.weight_decay, "gnn");
        read(s, "decoupled_weight_decay", c.gnn.decoupled_weight_decay, "gnn");
        read(s, "hidden_dim", c.gnn.hidden_dim, "gnn");
        read(s, "n_layers", c.gnn.n_layers, "gnn");
        read(s, "dropout", c.gnn.dropout, "gnn");
        read(s, "max_epochs", c.gnn.max_epochs, "gnn");
        read(s, "patience", c.gnn.patience, "gnn");
        read(s, "min_delta", c.gnn.min_delta, "gnn");
        read(s, "resample_negatives", c.gnn.resample_negatives, "gnn");
        read(s, "disease_scale", c.disease_scale, "gnn");
        if (s.contains("split")) {
            std::vector<double> r;
            read(s, "split", r, "gnn");
            if (r.size() != 3) throw ConfigError("config: gnn.split must have three ratios");
            c.split = {r[0], r[1], r[2]};
        }
    }
    if (j.contains("grid")) {
        const auto& s = j["grid"];
        check_keys(s, {"base", "variations"}, "grid");
        if (s.contains("base")) c.grid.base = variation_from_json(s["base"], "grid.base");
        if (s.contains("variations")) {
            if (!s["variations"].is_array()) throw ConfigError("config: grid.variations must be an array");
            c.grid.variations.clear();
            for (const auto& v : s["variations"]) c.grid.variations.push_back(variation_from_json(v, "grid.variations"));
        }
    }
    if (j.contains("ranking")) {
        const auto& s = j["ranking"];
        check_keys(s, {"probability_threshold"}, "ranking");
        read(s, "probability_threshold", c.probability_threshold, "ranking");
    }
    if (j.contains("execution")) {
        const auto& s = j["execution"];
        check_keys(s, {"threads", "cluster_order"}, "execution");
        read(s, "threads", c.threads, "execution");
        read(s, "cluster_order", c.cluster_order, "execution");
    }
    c.validate();
    return c;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    std::string text;
    for (const auto& l : csv::read_lines(path)) text += l + "\n";
    try {
        return parse_config(text);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string config_to_json(const PipelineConfig& config) { return to_json(config).dump(2); }

void apply_override(PipelineConfig& config, const std::string& key, const std::string& value) {
    json j = to_json(config);
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty() || !node->is_object() || !node->contains(part))
            throw ConfigError("unknown config key '" + key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;
    }
    if (node->is_string() && !parsed.is_string()) parsed = value;
    const bool num_ok = node->is_number() && parsed.is_number();
    if (node->type() != parsed.type() && !num_ok && !(node->is_array() && parsed.is_array()))
        throw ConfigError("config key '" + key + "' expects a " + std::string(node->type_name()) + ", got '" + value +
                          "'");
    *node = parsed;
    config = from_json(j);
}

std::vector<GridRow> hyperparameter_grid(const BipartiteGraph& graph, const EdgeSplit& split,
                                         const GnnTrainConfig& base, const std::vector<GridVariation>& variations) {
    std::vector<GridRow> rows;
    for (const auto& v : variations) {
        GridRow row;
        row.name = v.name;
        row.config = v.apply(base);
        try {
            const auto res = train_gnn(graph, split, row.config);
            row.epochs = static_cast<int>(res.history.size());
            row.test = evaluate_links(res.model, graph, split.test_pos, split.test_neg);
        } catch (const Error& e) {
            row.status = std::string("error: ") + e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_grid(const std::vector<GridRow>& rows, const fs::path& path) {
    std::string out =
        "variation,gnn_layers,lr,weight_decay,dropout,hidden_dim,accuracy,precision,recall,f1,roc_auc,epochs,status\n";
    for (const auto& r : rows) {
        const auto f = csv::format_double;
        out += csv::join({r.name, std::to_string(r.config.n_layers), f(r.config.lr), f(r.config.weight_decay),
                          f(r.config.dropout), std::to_string(r.config.hidden_dim), f(r.test.accuracy),
                          f(r.test.precision), f(r.test.recall), f(r.test.f1), f(r.test.roc_auc),
                          std::to_string(r.epochs), r.status}) +
               "\n";
    }
    csv::write_text(path, out);
}

EdgeList enumerate_candidates(const BipartiteGraph& graph, const EdgeList& train_edges) {
    const auto train = edge_keys(train_edges, graph.n_diseases());
    EdgeList out;
    for (int d = 0; d < graph.n_drugs(); ++d)
        for (int s = 0; s < graph.n_diseases(); ++s)
            if (!train.count(edge_key({d, s}, graph.n_diseases()))) out.push_back({d, s});
    return out;
}

RankedPredictions rank_and_filter(std::vector<Prediction> preds, double threshold) {
    std::stable_sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        if (a.chemical_id != b.chemical_id) return a.chemical_id < b.chemical_id;
        return a.disease_id < b.disease_id;
    });
    RankedPredictions r;
    for (std::size_t i = 0; i < preds.size(); ++i) preds[i].rank = static_cast<int>(i + 1);
    for (const auto& p : preds)
        if (p.probability >= threshold) r.confident.push_back(p);
    r.all = std::move(preds);
    return r;
}

void save_predictions(const std::vector<Prediction>& preds, const fs::path& path) {
    std::string out = "cluster_id,chemical_id,disease_id,probability,rank\n";
    for (const auto& p : preds)
        out += csv::join({std::to_string(p.cluster_id), p.chemical_id, p.disease_id, csv::format_double(p.probability),
                          std::to_string(p.rank)}) +
               "\n";
    csv::write_text(path, out);
}

std::vector<Prediction> load_predictions(const fs::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "cluster_id,chemical_id,disease_id,probability,rank")
        throw DataError(path.string() + ": not a predictions file");
    std::vector<Prediction> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split_line(lines[i]);
        if (f.size() != 5) throw DataError(path.string() + ": ragged row at line " + std::to_string(i + 1));
        Prediction p;
        try {
            p.cluster_id = std::stoi(f[0]);
            p.rank = std::stoi(f[4]);
        } catch (const std::exception&) {
            throw DataError(path.string() + ": bad integer at line " + std::to_string(i + 1));
        }
        p.chemical_id = f[1];
        p.disease_id = f[2];
        if (!csv::parse_double(f[3], p.probability))
            throw DataError(path.string() + ": bad probability at line " + std::to_string(i + 1));
        out.push_back(std::move(p));
    }
    return out;
}

std::uint64_t cluster_seed(std::uint64_t master_seed, int cluster_id) {
    return hash_label(master_seed, "cluster/" + std::to_string(cluster_id));
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct Layout {
    fs::path root;
    fs::path synth_dir() const { return root / "synthetic"; }
    fs::path preprocessed() const { return root / "preprocessed.csv"; }
    fs::path links_clean() const { return root / "links_clean.csv"; }
    fs::path normalization() const { return root / "normalization.json"; }
    fs::path ae_grid() const { return root / "ae_grid.csv"; }
    fs::path autoencoder() const { return root / "autoencoder.json"; }
    fs::path ae_embeddings() const { return root / "embeddings_ae.csv"; }
    fs::path sweep() const { return root / "sweep.csv"; }
    fs::path dec_model() const { return root / "dec_encoder.json"; }
    fs::path dec_history() const { return root / "dec_history.csv"; }
    fs::path embeddings() const { return root / "embeddings.csv"; }
    fs::path clusters() const { return root / "clusters.csv"; }
    fs::path cluster_dir(int id) const { return root / "clusters" / ("cluster_" + std::to_string(id)); }
    fs::path metrics() const { return root / "metrics.csv"; }
    fs::path grid() const { return root / "grid.csv"; }
    fs::path predictions() const { return root / "predictions.csv"; }
    fs::path confident() const { return root / "predictions_confident.csv"; }
    fs::path manifest() const { return root / "run_manifest.json"; }
};

struct StageContext {
    const PipelineConfig& cfg;
    Layout out;
    std::vector<std::string> warnings;
    json details = json::object();
};

void require(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p)) throw DataError("missing input " + p.string() + " (run the '" + producer + "' stage first)");
}

void stage_synth(StageContext& ctx) {
    const auto data = generate_synthetic(ctx.cfg.synth);
    save_synthetic(data, ctx.out.synth_dir());
    ctx.details["drugs"] = data.features.rows();
    ctx.details["links"] = data.links.records.size();
    ctx.details["seed"] = ctx.cfg.synth.seed;
}

void stage_preprocess(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    FeatureTable table;
    LinkTable links;
    if (!cfg.joined_path.empty()) {
        auto view = unique_drug_view(load_joined_records(cfg.joined_path));
        table = std::move(view.drugs);
        links = std::move(view.links);
    } else if (!cfg.features_path.empty()) {
        table = load_feature_table(cfg.features_path);
        links = load_link_table(cfg.links_path);
    } else {
        require(ctx.out.synth_dir() / "features.csv", "synth");
        table = load_feature_table(ctx.out.synth_dir() / "features.csv");
        links = load_link_table(ctx.out.synth_dir() / "links.csv");
    }
    auto filtered = filter_completeness(table, cfg.completeness_threshold);
    if (filtered.warning) ctx.warnings.push_back(*filtered.warning);
    if (filtered.table.rows() == 0) throw DataError("no drug passes the completeness threshold");
    if (!filtered.dropped_ids.empty())
        ctx.warnings.push_back(std::to_string(filtered.dropped_ids.size()) + " drugs dropped by the completeness filter");

    FeatureTable encoded = enumerate_categoricals(filtered.table);
    FeatureTable imputed = knn_impute(encoded, cfg.knn_k);
    auto [normalized, stats] = zscore_normalize(imputed);
    // The model input is purely numeric; categorical codes are kept as numbers.
    for (auto& c : normalized.columns) {
        c.kind = FeatureKind::Numeric;
        c.categories.clear();
        c.enumerated = false;
    }
    save_feature_table(normalized, ctx.out.preprocessed());

    const auto ids = normalized.id_index();
    links.deduplicate();
    LinkTable kept;
    std::size_t dropped = 0;
    for (const auto& rec : links.records) {
        if (ids.count(rec.first))
            kept.records.push_back(rec);
        else
            ++dropped;
    }
    if (dropped > 0)
        ctx.warnings.push_back(std::to_string(dropped) + " links dropped because their drug was filtered out or unknown");
    save_link_table(kept, ctx.out.links_clean());

    json norm;
    for (std::size_t c = 0; c < normalized.cols(); ++c)
        norm.push_back({{"column", normalized.columns[c].name},
                        {"mean", stats.mean[c]},
                        {"stddev", stats.stddev[c]},
                        {"applied", static_cast<bool>(stats.applied[c])}});
    detail::write_json(ctx.out.normalization(), norm);
    ctx.details["drugs_in"] = table.rows();
    ctx.details["drugs_kept"] = normalized.rows();
    ctx.details["features"] = normalized.cols();
    ctx.details["links_kept"] = kept.records.size();
}

void stage_train_ae(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    require(ctx.out.preprocessed(), "preprocess");
    const FeatureTable table = load_feature_table(ctx.out.preprocessed());
    const auto spec = build_halving_architecture(static_cast<Index>(table.cols()), cfg.latent_dim);
    const std::uint64_t seed = hash_label(cfg.master_seed, "autoencoder");
    std::string grid = "lr,best_loss,best_epoch,epochs,early_stopped\n";
    std::optional<AeTrainResult> best;
    double best_loss = 0.0, best_lr = 0.0;
    for (double lr : cfg.ae_lr_grid) {
        AeTrainConfig tc = cfg.ae;
        tc.lr = lr;
        tc.seed = seed;
        auto res = train_autoencoder(table, spec, tc);
        const double loss = res.loss_history.at(static_cast<std::size_t>(res.best_epoch));
        grid += csv::join({csv::format_double(lr), csv::format_double(loss), std::to_string(res.best_epoch),
                           std::to_string(res.loss_history.size()), res.early_stopped ? "1" : "0"}) +
                "\n";
        if (!best || loss < best_loss) {
            best_loss = loss;
            best_lr = lr;
            best = std::move(res);
        }
    }
    csv::write_text(ctx.out.ae_grid(), grid);
    save_autoencoder(best->model, ctx.out.autoencoder());
    save_embeddings(encode(best->model, table), ctx.out.ae_embeddings());
    json dims = json::array();
    for (Index d : spec.encoder_dims) dims.push_back(d);
    ctx.details["encoder_dims"] = dims;
    ctx.details["selected_lr"] = best_lr;
    ctx.details["best_loss"] = best_loss;
    ctx.details["seed"] = seed;
}

std::vector<int> aligned_assignments(const LatentEmbedding& emb, const fs::path& clusters_path) {
    std::map<std::string, int> by_id;
    for (const auto& [id, c] : load_clusters(clusters_path)) by_id[id] = c;
    std::vector<int> out;
    out.reserve(emb.chemical_ids.size());
    for (const auto& id : emb.chemical_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("drug '" + id + "' has an embedding but no cluster assignment");
        out.push_back(it->second);
    }
    return out;
}

void stage_cluster(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    require(ctx.out.autoencoder(), "train-ae");
    const FeatureTable table = load_feature_table(ctx.out.preprocessed());
    const Autoencoder model = load_autoencoder(ctx.out.autoencoder());
    const LatentEmbedding emb = encode(model, table);
    const int n = static_cast<int>(emb.vectors.rows());
    const int k_max = std::min(cfg.sweep_k_max, n - 1);
    const std::uint64_t sweep_seed = hash_label(cfg.master_seed, "sweep");
    int k = cfg.dec_k;
    if (k_max >= cfg.sweep_k_min) {
        const auto sweep = k_sweep(emb.vectors, cfg.sweep_k_min, k_max, sweep_seed, cfg.k_min_useful, cfg.threads);
        save_sweep(sweep, ctx.out.sweep());
        if (k == 0) k = sweep.selected_k;
        ctx.details["sweep_selected_k"] = sweep.selected_k;
    } else if (k == 0) {
        throw DataError("too few drugs (" + std::to_string(n) + ") for a silhouette sweep");
    }
    if (k_max < cfg.sweep_k_max)
        ctx.warnings.push_back("sweep range clipped to k <= " + std::to_string(k_max) + " by the drug count");
    if (k > n) throw ConfigError("dec.k = " + std::to_string(k) + " exceeds the drug count " + std::to_string(n));

    DecConfig dc;
    dc.k = k;
    dc.lr = cfg.dec_lr;
    dc.update_interval = cfg.dec_update_interval;
    dc.tol = cfg.dec_tol;
    dc.max_epochs = cfg.dec_max_epochs;
    dc.seed = hash_label(cfg.master_seed, "dec");
    const DecResult res = train_dec(model, table, dc);
    save_autoencoder(res.model, ctx.out.dec_model());
    save_embeddings(res.embedding, ctx.out.embeddings());
    save_clusters(res.embedding.chemical_ids, res.clusters.assignments, ctx.out.clusters());
    std::string hist = "epoch,kl\n";
    for (std::size_t e = 0; e < res.kl_history.size(); ++e)
        hist += std::to_string(e) + "," + csv::format_double(res.kl_history[e]) + "\n";
    csv::write_text(ctx.out.dec_history(), hist);
    ctx.details["k"] = k;
    ctx.details["initial_silhouette"] = res.initial_silhouette;
    ctx.details["silhouette"] = res.clusters.silhouette;
    ctx.details["epochs"] = res.epochs;
    ctx.details["converged"] = res.converged;
    ctx.details["sweep_seed"] = sweep_seed;
    ctx.details["dec_seed"] = dc.seed;
}

ClusterPartition load_partition(const Layout& out) {
    require(out.embeddings(), "cluster");
    require(out.clusters(), "cluster");
    require(out.links_clean(), "preprocess");
    const LatentEmbedding emb = load_embeddings(out.embeddings());
    const auto assignments = aligned_assignments(emb, out.clusters());
    return partition_clusters(emb, assignments, load_link_table(out.links_clean()));
}

struct ClusterRun {
    int cluster_id = 0;
    std::uint64_t seed = 0;
    std::optional<std::string> skipped;
    BipartiteGraph graph;
    EdgeSplit split;
    GnnTrainResult trained;
    EvalReport test;
};

ClusterRun train_cluster(const PipelineConfig& cfg, const ClusterSubset& cluster) {
    ClusterRun run;
    run.cluster_id = cluster.cluster_id;
    run.seed = cluster_seed(cfg.master_seed, cluster.cluster_id);
    if (cluster.links.records.empty()) {
        run.skipped = "cluster " + std::to_string(cluster.cluster_id) + " skipped: no links";
        return run;
    }
    try {
        run.graph = build_bipartite(cluster, run.seed, cfg.disease_scale);
        run.split = make_split(run.graph, cfg.split, run.seed);
        if (run.split.val_pos.empty() || run.split.test_pos.empty())
            throw DataError("too few edges (" + std::to_string(run.graph.edges_treat.size()) +
                            ") for non-empty validation and test splits");
    } catch (const DataError& e) {
        run.skipped = "cluster " + std::to_string(cluster.cluster_id) + " skipped: " + e.what();
        return run;
    }
    GnnTrainConfig gc = cfg.gnn;
    gc.seed = run.seed;
    try {
        run.trained = train_gnn(run.graph, run.split, gc);
        run.test = evaluate_links(run.trained.model, run.graph, run.split.test_pos, run.split.test_neg);
    } catch (const Error& e) {
        throw Error(e.kind(), "cluster " + std::to_string(cluster.cluster_id) + ": " + e.what());
    }
    return run;
}

void save_edge_ids(const BipartiteGraph& g, const EdgeList& edges, const fs::path& path) {
    LinkTable t;
    for (const auto& e : edges)
        t.records.emplace_back(g.drug_ids[static_cast<std::size_t>(e.drug)],
                               g.disease_ids[static_cast<std::size_t>(e.disease)]);
    save_link_table(t, path);
}

std::vector<const ClusterSubset*> processing_order(const PipelineConfig& cfg, const ClusterPartition& part) {
    std::map<int, const ClusterSubset*> by_id;
    for (const auto& c : part.clusters) by_id[c.cluster_id] = &c;
    std::vector<const ClusterSubset*> order;
    if (cfg.cluster_order.empty()) {
        for (const auto& [id, c] : by_id) order.push_back(c);
        return order;
    }
    if (cfg.cluster_order.size() != by_id.size())
        throw ConfigError("execution.cluster_order must list every cluster exactly once");
    for (int id : cfg.cluster_order) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ConfigError("execution.cluster_order names unknown cluster " + std::to_string(id));
        order.push_back(it->second);
    }
    return order;
}

void stage_train_gnn(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const ClusterPartition part = load_partition(ctx.out);
    const auto order = processing_order(cfg, part);

    std::vector<ClusterRun> runs;
    if (cfg.threads <= 1) {
        for (const auto* c : order) runs.push_back(train_cluster(cfg, *c));
    } else {
        std::vector<std::future<ClusterRun>> pending;
        for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.threads)) {
            pending.clear();
            for (std::size_t j = i; j < std::min(order.size(), i + static_cast<std::size_t>(cfg.threads)); ++j)
                pending.push_back(std::async(std::launch::async, train_cluster, std::cref(cfg), std::cref(*order[j])));
            for (auto& f : pending) runs.push_back(f.get());
        }
    }
    // Single writer, ascending cluster id regardless of processing order.
    std::sort(runs.begin(), runs.end(), [](const ClusterRun& a, const ClusterRun& b) { return a.cluster_id < b.cluster_id; });
    std::vector<ClusterMetrics> all;
    json seeds = json::object();
    json trained = json::array();
    for (const auto& run : runs) {
        seeds[std::to_string(run.cluster_id)] = run.seed;
        const fs::path dir = ctx.out.cluster_dir(run.cluster_id);
        if (run.skipped) {
            ctx.warnings.push_back(*run.skipped);
            if (fs::exists(dir / "model.json")) fs::remove(dir / "model.json");
            continue;
        }
        GnnTrainConfig gc = cfg.gnn;
        gc.seed = run.seed;
        save_history(run.trained.history, dir / "history.csv");
        save_metrics({{run.cluster_id, run.test}}, dir / "metrics.csv");
        save_gnn(run.trained.model, gc, dir / "model.json");
        save_edge_ids(run.graph, run.split.train_pos, dir / "train_edges.csv");
        dump_graph(run.graph, &run.split, dir / "graph.json");
        all.push_back({run.cluster_id, run.test});
        trained.push_back({{"cluster_id", run.cluster_id},
                           {"drugs", run.graph.n_drugs()},
                           {"diseases", run.graph.n_diseases()},
                           {"edges", run.graph.edges_treat.size()},
                           {"epochs", run.trained.history.size()},
                           {"best_epoch", run.trained.best_epoch},
                           {"test_roc_auc", run.test.roc_auc},
                           {"test_f1", run.test.f1}});
    }
    save_metrics(all, ctx.out.metrics());
    ctx.details["cluster_seeds"] = seeds;
    ctx.details["trained"] = trained;
}

void stage_grid(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const ClusterPartition part = load_partition(ctx.out);
    const ClusterSubset* largest = nullptr;
    for (const auto& c : part.clusters)
        if (!largest || c.links.records.size() > largest->links.records.size()) largest = &c;
    if (!largest || largest->links.records.empty()) throw DataError("no cluster has links; grid cannot run");
    const std::uint64_t seed = cluster_seed(cfg.master_seed, largest->cluster_id);
    const BipartiteGraph g = build_bipartite(*largest, seed, cfg.disease_scale);
    const EdgeSplit split = make_split(g, cfg.split, seed);
    if (split.val_pos.empty() || split.test_pos.empty())
        throw DataError("largest cluster has too few edges for a validation and test split");
    GnnTrainConfig base = cfg.grid.base.apply(cfg.gnn);
    base.seed = seed;
    const auto rows = hyperparameter_grid(g, split, base, cfg.grid.variations);
    save_grid(rows, ctx.out.grid());
    for (const auto& r : rows)
        if (r.status != "ok") ctx.warnings.push_back("grid row '" + r.name + "' failed: " + r.status);
    ctx.details["cluster_id"] = largest->cluster_id;
    ctx.details["links"] = largest->links.records.size();
    ctx.details["seed"] = seed;
    ctx.details["rows"] = rows.size();
}

void stage_predict(StageContext& ctx) {
    const auto& cfg = ctx.cfg;
    const ClusterPartition part = load_partition(ctx.out);
    std::vector<Prediction> preds;
    int models = 0;
    for (const auto& c : part.clusters) {
        const fs::path model_path = ctx.out.cluster_dir(c.cluster_id) / "model.json";
        if (!fs::exists(model_path)) {
            ctx.warnings.push_back("cluster " + std::to_string(c.cluster_id) + " has no trained model; not scored");
            continue;
        }
        const GnnModel model = load_gnn(model_path);
        const BipartiteGraph g = build_bipartite(c, cluster_seed(cfg.master_seed, c.cluster_id), cfg.disease_scale);
        if (model.disease_embeddings.rows() != g.n_diseases())
            throw DataError("cluster " + std::to_string(c.cluster_id) + ": model does not match the cluster graph");
        const EdgeList cand = enumerate_candidates(g, model.message_edges);
        const auto probs = predict_links(model, g, cand);
        for (std::size_t i = 0; i < cand.size(); ++i)
            preds.push_back({c.cluster_id, g.drug_ids[static_cast<std::size_t>(cand[i].drug)],
                             g.disease_ids[static_cast<std::size_t>(cand[i].disease)], probs[i], 0});
        ++models;
    }
    if (models == 0) throw DataError("no trained cluster models found (run the 'train-gnn' stage first)");
    const auto ranked = rank_and_filter(std::move(preds), cfg.probability_threshold);
    save_predictions(ranked.all, ctx.out.predictions());
    save_predictions(ranked.confident, ctx.out.confident());
    ctx.details["candidates"] = ranked.all.size();
    ctx.details["above_threshold"] = ranked.confident.size();
    ctx.details["threshold"] = cfg.probability_threshold;
}

void update_manifest(const PipelineConfig& cfg, const Layout& out, const StageContext& ctx, const std::string& stage,
                     double seconds) {
    json m;
    if (fs::exists(out.manifest())) {
        try {
            m = detail::read_json(out.manifest());
        } catch (const DataError&) {
            m = json::object();
        }
    }
    m["format"] = "decgnn-run-manifest";
    m["version"] = 1;
    m["tool_version"] = kVersion;
    m["config"] = to_json(cfg);
    m["master_seed"] = cfg.master_seed;
    if (!m.contains("stages")) m["stages"] = json::object();
    m["stages"][stage] = {{"seconds", seconds}, {"warnings", ctx.warnings}, {"details", ctx.details}};
    json all = json::array();
    for (const auto& name : stage_names())
        if (m["stages"].contains(name))
            for (const auto& w : m["stages"][name]["warnings"]) all.push_back(name + ": " + w.get<std::string>());
    m["warnings"] = all;
    detail::write_json(out.manifest(), m);
}

StageResult execute(const PipelineConfig& cfg, const std::string& stage) {
    StageContext ctx{cfg, Layout{cfg.output_dir}, {}, json::object()};
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fs::create_directories(ctx.out.root);
        if (stage == "synth")
            stage_synth(ctx);
        else if (stage == "preprocess")
            stage_preprocess(ctx);
        else if (stage == "train-ae")
            stage_train_ae(ctx);
        else if (stage == "cluster")
            stage_cluster(ctx);
        else if (stage == "train-gnn")
            stage_train_gnn(ctx);
        else if (stage == "grid")
            stage_grid(ctx);
        else if (stage == "predict")
            stage_predict(ctx);
        else
            throw ConfigError("unknown stage '" + stage + "'");
    } catch (const Error& e) {
        throw Error(e.kind(), "stage " + stage + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw DataError("stage " + stage + ": " + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    update_manifest(cfg, ctx.out, ctx, stage, secs);
    return {stage, secs, ctx.warnings};
}

}  // namespace

std::vector<StageResult> run_stage(const PipelineConfig& config, const std::string& stage) {
    config.validate();
    if (stage == "run-all") return run_pipeline(config);
    return {execute(config, stage)};
}

std::vector<StageResult> run_pipeline(const PipelineConfig& config) {
    config.validate();
    std::vector<StageResult> out;
    const bool synthesize = config.features_path.empty() && config.joined_path.empty();
    for (const auto& s : stage_names()) {
        if (s == "synth" && !synthesize) continue;
        out.push_back(execute(config, s));
    }
    return out;
}

void validate_manifest(const fs::path& path) {
    const json m = detail::read_json(path);
    try {
        if (m.at("format") != "decgnn-run-manifest" || m.at("version") != 1)
            throw DataError(path.string() + ": not a version-1 run manifest");
        (void)from_json(m.at("config"));
        if (!m.at("master_seed").is_number_unsigned()) throw DataError(path.string() + ": master_seed missing");
        if (!m.at("tool_version").is_string()) throw DataError(path.string() + ": tool_version missing");
        for (const auto& [name, s] : m.at("stages").items()) {
            if (!s.at("seconds").is_number() || !s.at("warnings").is_array() || !s.at("details").is_object())
                throw DataError(path.string() + ": stage '" + name + "' is incomplete");
        }
        if (!m.at("warnings").is_array()) throw DataError(path.string() + ": warnings missing");
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed manifest: " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(path.string() + ": manifest config invalid: " + e.what());
    }
}

}  // namespace decgnn
