#pragma once

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

#include "decgnn/rng.hpp"

namespace decgnn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

using ParamView = std::span<double>;
using GradView = std::span<const double>;

inline ParamView view(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline ParamView view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline GradView cview(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline GradView cview(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

enum class Activation { ReLU, Identity };

// Fully connected layer computing activation(x W^T + b) row-wise.
struct DenseLayer {
    Matrix weights;  // [out_dim x in_dim]
    Vector bias;     // [out_dim]
    Activation activation = Activation::Identity;

    Index in_dim() const { return weights.cols(); }
    Index out_dim() const { return weights.rows(); }

    // He-uniform for ReLU layers, Xavier-uniform for Identity layers; zero bias.
    static DenseLayer initialized(Index in_dim, Index out_dim, Activation act, RngStream& rng);
    static DenseLayer zeros(Index in_dim, Index out_dim, Activation act);

    void validate() const;
};

struct DenseCache {
    const DenseLayer* layer = nullptr;
    Matrix input;
    Matrix pre_activation;
};

struct DenseGrads {
    Matrix input;
    Matrix weights;
    Vector bias;
};

Matrix dense_forward(const Matrix& input, const DenseLayer& layer, DenseCache* cache = nullptr);
DenseGrads dense_backward(const Matrix& grad_output, const DenseCache& cache, const DenseLayer& layer);

struct MseResult {
    double loss = 0.0;
    Matrix grad;
};
MseResult mse_loss(const Matrix& pred, const Matrix& target);

struct BceResult {
    double loss = 0.0;
    Vector grad;
};
// Mean binary cross-entropy on raw logits. Labels must be exactly 0 or 1.
BceResult bce_with_logits(const Vector& logits, const Vector& labels);

double sigmoid(double x);

struct DropoutResult {
    Matrix output;
    Matrix mask;  // per-element multiplier: 0 or 1/(1-rate)
};
DropoutResult dropout(const Matrix& input, double rate, RngStream& rng, bool training);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    // true: params <- params - lr * weight_decay * params before the update.
    // false: weight_decay * params is added to the gradient instead (L2).
    bool decoupled_weight_decay = true;
    long step_count = 0;
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;

    void validate() const;
};

// One Adam update over all parameter blocks. Moments are allocated lazily on
// the first step and their shapes are checked on every later step.
// See AdamState::decoupled_weight_decay for the two weight-decay modes.
void adam_step(std::span<const ParamView> params, std::span<const GradView> grads, AdamState& state,
               int epoch = -1);

// Ordered dense layers; used for the autoencoder halves and the edge decoder.
class LayerStack {
public:
    std::vector<DenseLayer> layers;

    Index in_dim() const { return layers.front().in_dim(); }
    Index out_dim() const { return layers.back().out_dim(); }

    Matrix forward(const Matrix& input, std::vector<DenseCache>* caches = nullptr) const;
    // Returns the gradient w.r.t. the stack input; per-layer grads written to `grads`.
    Matrix backward(const Matrix& grad_output, const std::vector<DenseCache>& caches,
                    std::vector<DenseGrads>& grads) const;

    std::vector<ParamView> parameters();
    static std::vector<GradView> grad_views(const std::vector<DenseGrads>& grads);
    std::size_t parameter_count() const;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t block = 0;
    std::size_t element = 0;
};

// Central finite differences over every parameter of `params`, compared with
// the analytic gradient in `analytic`. Relative error uses
// |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParamView> params,
                           std::span<const GradView> analytic, double step = 1e-5, double floor = 1e-6);

}  // namespace decgnn
