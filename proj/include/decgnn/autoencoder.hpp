#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "decgnn/numerics.hpp"
#include "decgnn/preprocess.hpp"

namespace decgnn {

// Layer widths of the symmetric autoencoder. encoder_dims runs from the input
// width down to the latent width; decoder_dims is its reverse.
struct AutoencoderSpec {
    Index input_dim = 0;
    Index latent_dim = 0;
    std::vector<Index> encoder_dims;
    std::vector<Index> decoder_dims;

    // Encoder strictly decreasing (a single equal-width map is allowed),
    // decoder the exact mirror.
    void validate() const;
};

// Halves the width (integer floor) while the next half still exceeds
// latent_dim, then maps to latent_dim.
AutoencoderSpec build_halving_architecture(Index input_dim, Index latent_dim);

struct AeTrainConfig {
    double lr = 1e-4;
    int max_epochs = 1000;
    int patience = 10;
    double min_improvement = 1e-6;
    Index batch_size = 256;
    Index full_batch_limit = 4096;
    std::uint64_t seed = 0;

    void validate() const;
};

// ReLU on every layer except the last decoder layer, which is Identity so
// z-scored (negative) targets are reachable.
struct Autoencoder {
    AutoencoderSpec spec;
    LayerStack encoder;
    LayerStack decoder;

    static Autoencoder initialized(const AutoencoderSpec& spec, RngStream& rng);

    Matrix encode(const Matrix& x) const { return encoder.forward(x); }
    Matrix decode(const Matrix& z) const { return decoder.forward(z); }
    Matrix reconstruct(const Matrix& x) const { return decode(encode(x)); }

    std::vector<ParamView> parameters();
};

struct LatentEmbedding {
    std::vector<std::string> chemical_ids;
    Matrix vectors;  // [n x latent_dim]
};

struct AeTrainResult {
    Autoencoder model;  // best-loss parameters
    std::vector<double> loss_history;
    int best_epoch = 0;
    bool early_stopped = false;
};

AeTrainResult train_autoencoder(const FeatureTable& table, const AutoencoderSpec& spec, const AeTrainConfig& config);

// Loss of reconstructing x, plus gradients for every autoencoder parameter
// (same order as Autoencoder::parameters()).
double autoencoder_loss_and_grads(const Autoencoder& model, const Matrix& x, std::vector<DenseGrads>* encoder_grads,
                                  std::vector<DenseGrads>* decoder_grads);

LatentEmbedding encode(const Autoencoder& model, const FeatureTable& table);

void save_autoencoder(const Autoencoder& model, const std::filesystem::path& path);
Autoencoder load_autoencoder(const std::filesystem::path& path);

void save_embeddings(const LatentEmbedding& emb, const std::filesystem::path& path);
LatentEmbedding load_embeddings(const std::filesystem::path& path);

}  // namespace decgnn
