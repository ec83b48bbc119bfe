#include "decgnn/autoencoder.hpp"

#include <cmath>
#include <numeric>

#include "decgnn/csv.hpp"
#include "decgnn/early_stopping.hpp"
#include "decgnn/errors.hpp"
#include "json_io.hpp"

namespace decgnn {

void AutoencoderSpec::validate() const {
    if (encoder_dims.size() < 2) throw ConfigError("autoencoder spec needs at least two encoder widths");
    if (encoder_dims.front() != input_dim || encoder_dims.back() != latent_dim)
        throw ConfigError("autoencoder spec: encoder must run from input_dim to latent_dim");
    for (Index w : encoder_dims)
        if (w < 1) throw ConfigError("autoencoder spec: widths must be positive");
    const bool direct_equal = encoder_dims.size() == 2 && input_dim == latent_dim;
    for (std::size_t i = 1; i < encoder_dims.size(); ++i)
        if (encoder_dims[i] >= encoder_dims[i - 1] && !direct_equal)
            throw ConfigError("autoencoder spec: encoder widths must strictly decrease");
    if (decoder_dims.size() != encoder_dims.size() ||
        !std::equal(decoder_dims.begin(), decoder_dims.end(), encoder_dims.rbegin()))
        throw ConfigError("autoencoder spec: decoder must mirror the encoder");
}

AutoencoderSpec build_halving_architecture(Index input_dim, Index latent_dim) {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (latent_dim >= input_dim)
        throw ConfigError("latent_dim (" + std::to_string(latent_dim) + ") must be below input_dim (" +
                          std::to_string(input_dim) + ")");
    AutoencoderSpec s;
    s.input_dim = input_dim;
    s.latent_dim = latent_dim;
    s.encoder_dims.push_back(input_dim);
    while (s.encoder_dims.back() / 2 > latent_dim) s.encoder_dims.push_back(s.encoder_dims.back() / 2);
    s.encoder_dims.push_back(latent_dim);
    s.decoder_dims.assign(s.encoder_dims.rbegin(), s.encoder_dims.rend());
    return s;
}

void AeTrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("autoencoder lr must be positive");
    if (max_epochs < 1) throw ConfigError("autoencoder max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("autoencoder patience must be >= 1");
    if (batch_size < 1) throw ConfigError("autoencoder batch_size must be >= 1");
}

Autoencoder Autoencoder::initialized(const AutoencoderSpec& spec, RngStream& rng) {
    spec.validate();
    Autoencoder ae;
    ae.spec = spec;
    for (std::size_t i = 1; i < spec.encoder_dims.size(); ++i)
        ae.encoder.layers.push_back(
            DenseLayer::initialized(spec.encoder_dims[i - 1], spec.encoder_dims[i], Activation::ReLU, rng));
    for (std::size_t i = 1; i < spec.decoder_dims.size(); ++i) {
        const bool last = i + 1 == spec.decoder_dims.size();
        ae.decoder.layers.push_back(DenseLayer::initialized(spec.decoder_dims[i - 1], spec.decoder_dims[i],
                                                            last ? Activation::Identity : Activation::ReLU, rng));
    }
    return ae;
}

std::vector<ParamView> Autoencoder::parameters() {
    auto p = encoder.parameters();
    auto d = decoder.parameters();
    p.insert(p.end(), d.begin(), d.end());
    return p;
}

double autoencoder_loss_and_grads(const Autoencoder& model, const Matrix& x, std::vector<DenseGrads>* encoder_grads,
                                  std::vector<DenseGrads>* decoder_grads) {
    std::vector<DenseCache> enc_cache, dec_cache;
    const bool want_grads = encoder_grads && decoder_grads;
    const Matrix z = model.encoder.forward(x, want_grads ? &enc_cache : nullptr);
    const Matrix recon = model.decoder.forward(z, want_grads ? &dec_cache : nullptr);
    auto mse = mse_loss(recon, x);
    if (want_grads) {
        const Matrix gz = model.decoder.backward(mse.grad, dec_cache, *decoder_grads);
        model.encoder.backward(gz, enc_cache, *encoder_grads);
    }
    return mse.loss;
}

AeTrainResult train_autoencoder(const FeatureTable& table, const AutoencoderSpec& spec, const AeTrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (!table.fully_observed()) throw DataError("train_autoencoder: table must be fully observed");
    if (static_cast<Index>(table.cols()) != spec.input_dim)
        throw ConfigError("train_autoencoder: table has " + std::to_string(table.cols()) + " features, spec expects " +
                          std::to_string(spec.input_dim));
    if (table.rows() == 0) throw DataError("train_autoencoder: empty table");

    RngStream init_rng(cfg.seed, "autoencoder/init");
    RngStream batch_rng(cfg.seed, "autoencoder/batches");
    AeTrainResult res;
    res.model = Autoencoder::initialized(spec, init_rng);
    Autoencoder& model = res.model;
    Autoencoder best = model;

    AdamState adam;
    adam.lr = cfg.lr;
    adam.validate();
    EarlyStopper stopper(cfg.patience, cfg.min_improvement, EarlyStopper::Goal::Minimize);

    const Matrix& x = table.values;
    const Index n = x.rows();
    const bool full_batch = n <= cfg.full_batch_limit;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});

    std::vector<DenseGrads> eg, dg;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        if (full_batch) {
            epoch_loss = autoencoder_loss_and_grads(model, x, &eg, &dg);
            if (!std::isfinite(epoch_loss)) throw TrainingError("autoencoder loss is not finite", epoch);
            if (stopper.observe(epoch_loss)) best = model;
            if (stopper.should_stop()) {
                res.loss_history.push_back(epoch_loss);
                res.early_stopped = true;
                break;
            }
            auto grads = LayerStack::grad_views(eg);
            auto dgv = LayerStack::grad_views(dg);
            grads.insert(grads.end(), dgv.begin(), dgv.end());
            adam_step(model.parameters(), grads, adam, epoch);
        } else {
            // Mini-batch epochs: the recorded loss is the size-weighted mean of
            // batch losses, and the best snapshot is taken after the epoch.
            batch_rng.shuffle(order);
            for (Index start = 0; start < n; start += cfg.batch_size) {
                const Index len = std::min(cfg.batch_size, n - start);
                Matrix xb(len, x.cols());
                for (Index i = 0; i < len; ++i) xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
                const double bl = autoencoder_loss_and_grads(model, xb, &eg, &dg);
                if (!std::isfinite(bl)) throw TrainingError("autoencoder loss is not finite", epoch);
                epoch_loss += bl * static_cast<double>(len) / static_cast<double>(n);
                auto grads = LayerStack::grad_views(eg);
                auto dgv = LayerStack::grad_views(dg);
                grads.insert(grads.end(), dgv.begin(), dgv.end());
                adam_step(model.parameters(), grads, adam, epoch);
            }
            if (stopper.observe(epoch_loss)) best = model;
            if (stopper.should_stop()) {
                res.loss_history.push_back(epoch_loss);
                res.early_stopped = true;
                break;
            }
        }
        res.loss_history.push_back(epoch_loss);
    }
    res.best_epoch = stopper.best_index();
    res.model = std::move(best);
    return res;
}

LatentEmbedding encode(const Autoencoder& model, const FeatureTable& table) {
    if (static_cast<Index>(table.cols()) != model.spec.input_dim)
        throw ConfigError("encode: table has " + std::to_string(table.cols()) + " features, model expects " +
                          std::to_string(model.spec.input_dim));
    if (!table.fully_observed()) throw DataError("encode: table must be fully observed");
    return {table.chemical_ids, model.encode(table.values)};
}

void save_autoencoder(const Autoencoder& model, const std::filesystem::path& path) {
    detail::json j;
    j["format"] = "decgnn-autoencoder";
    j["version"] = 1;
    j["spec"] = {{"input_dim", model.spec.input_dim},
                 {"latent_dim", model.spec.latent_dim},
                 {"encoder_dims", model.spec.encoder_dims},
                 {"decoder_dims", model.spec.decoder_dims}};
    j["encoder"] = detail::stack_to_json(model.encoder);
    j["decoder"] = detail::stack_to_json(model.decoder);
    detail::write_json(path, j);
}

Autoencoder load_autoencoder(const std::filesystem::path& path) {
    const auto j = detail::read_json(path);
    try {
        if (j.at("format") != "decgnn-autoencoder" || j.at("version") != 1)
            throw DataError(path.string() + ": not a version-1 autoencoder checkpoint");
        Autoencoder m;
        const auto& s = j.at("spec");
        m.spec.input_dim = s.at("input_dim").get<Index>();
        m.spec.latent_dim = s.at("latent_dim").get<Index>();
        m.spec.encoder_dims = s.at("encoder_dims").get<std::vector<Index>>();
        m.spec.decoder_dims = s.at("decoder_dims").get<std::vector<Index>>();
        m.spec.validate();
        m.encoder = detail::stack_from_json(j.at("encoder"));
        m.decoder = detail::stack_from_json(j.at("decoder"));
        if (m.encoder.layers.size() + 1 != m.spec.encoder_dims.size() ||
            m.decoder.layers.size() + 1 != m.spec.decoder_dims.size())
            throw DataError(path.string() + ": layer count does not match spec");
        return m;
    } catch (const detail::json::exception& e) {
        throw DataError(path.string() + ": malformed autoencoder checkpoint: " + e.what());
    }
}

void save_embeddings(const LatentEmbedding& emb, const std::filesystem::path& path) {
    std::string out = "chemical_id";
    for (Index c = 0; c < emb.vectors.cols(); ++c) out += ",z_" + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < emb.chemical_ids.size(); ++r) {
        out += csv::escape(emb.chemical_ids[r]);
        for (Index c = 0; c < emb.vectors.cols(); ++c)
            out += "," + csv::format_double(emb.vectors(static_cast<Index>(r), c));
        out += '\n';
    }
    csv::write_text(path, out);
}

LatentEmbedding load_embeddings(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path.string() + ": empty embeddings file");
    const auto header = csv::split_line(lines[0]);
    if (header.empty() || header[0] != "chemical_id") throw DataError(path.string() + ": header must start with chemical_id");
    const auto dim = static_cast<Index>(header.size() - 1);
    LatentEmbedding emb;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = csv::split_line(lines[i]);
        if (f.size() != header.size()) throw DataError(path.string() + ": ragged row at line " + std::to_string(i + 1));
        rows.push_back(std::move(f));
    }
    emb.vectors.resize(static_cast<Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        emb.chemical_ids.push_back(rows[r][0]);
        for (Index c = 0; c < dim; ++c)
            if (!csv::parse_double(rows[r][static_cast<std::size_t>(c + 1)], emb.vectors(static_cast<Index>(r), c)))
                throw DataError(path.string() + ": bad number in row " + std::to_string(r + 2));
    }
    return emb;
}

}  // namespace decgnn
