#include "decgnn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "decgnn/errors.hpp"

namespace decgnn {
namespace {

std::string dims(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

DenseLayer DenseLayer::initialized(Index in_dim, Index out_dim, Activation act, RngStream& rng) {
    if (in_dim < 1 || out_dim < 1) throw ConfigError("dense layer dims must be positive, got " + dims(out_dim, in_dim));
    DenseLayer layer = zeros(in_dim, out_dim, act);
    const double limit = act == Activation::ReLU ? std::sqrt(6.0 / static_cast<double>(in_dim))
                                                 : std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = rng.uniform_open(-limit, limit);
    return layer;
}

DenseLayer DenseLayer::zeros(Index in_dim, Index out_dim, Activation act) {
    DenseLayer layer;
    layer.weights = Matrix::Zero(out_dim, in_dim);
    layer.bias = Vector::Zero(out_dim);
    layer.activation = act;
    return layer;
}

void DenseLayer::validate() const {
    if (bias.size() != weights.rows())
        throw ConfigError("dense layer bias length " + std::to_string(bias.size()) + " does not match weights " +
                          dims(weights.rows(), weights.cols()));
    if (!weights.allFinite() || !bias.allFinite()) throw ConfigError("dense layer has non-finite parameters");
}

Matrix dense_forward(const Matrix& input, const DenseLayer& layer, DenseCache* cache) {
    if (input.cols() != layer.in_dim())
        throw ConfigError("dense_forward: input " + dims(input.rows(), input.cols()) + " vs layer in_dim " +
                          std::to_string(layer.in_dim()));
    Matrix pre = input * layer.weights.transpose();
    pre.rowwise() += layer.bias.transpose();
    Matrix out = layer.activation == Activation::ReLU ? Matrix(pre.cwiseMax(0.0)) : pre;
    if (cache) {
        cache->layer = &layer;
        cache->input = input;
        cache->pre_activation = std::move(pre);
    }
    return out;
}

DenseGrads dense_backward(const Matrix& grad_output, const DenseCache& cache, const DenseLayer& layer) {
    if (cache.layer != &layer || cache.input.cols() != layer.in_dim() ||
        cache.pre_activation.cols() != layer.out_dim())
        throw InternalError("dense_backward: cache does not belong to this layer");
    if (grad_output.rows() != cache.pre_activation.rows() || grad_output.cols() != cache.pre_activation.cols())
        throw InternalError("dense_backward: grad_output " + dims(grad_output.rows(), grad_output.cols()) +
                            " does not match forward output " +
                            dims(cache.pre_activation.rows(), cache.pre_activation.cols()));
    Matrix grad_pre = grad_output;
    if (layer.activation == Activation::ReLU)
        grad_pre = (cache.pre_activation.array() > 0.0).select(grad_output, 0.0);
    DenseGrads g;
    g.weights = grad_pre.transpose() * cache.input;
    g.bias = grad_pre.colwise().sum().transpose();
    g.input = grad_pre * layer.weights;
    return g;
}

MseResult mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ConfigError("mse_loss: shape " + dims(pred.rows(), pred.cols()) + " vs " +
                          dims(target.rows(), target.cols()));
    MseResult r;
    const auto n = static_cast<double>(pred.size());
    Matrix diff = pred - target;
    r.loss = diff.squaredNorm() / n;
    r.grad = (2.0 / n) * diff;
    return r;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

BceResult bce_with_logits(const Vector& logits, const Vector& labels) {
    if (logits.size() != labels.size())
        throw ConfigError("bce_with_logits: " + std::to_string(logits.size()) + " logits vs " +
                          std::to_string(labels.size()) + " labels");
    if (logits.size() == 0) throw DataError("bce_with_logits: empty input");
    BceResult r;
    r.grad.resize(logits.size());
    const auto n = static_cast<double>(logits.size());
    double total = 0.0;
    for (Index i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        const double y = labels[i];
        if (y != 0.0 && y != 1.0) throw DataError("bce_with_logits: label " + std::to_string(y) + " is not binary");
        total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        r.grad[i] = (sigmoid(x) - y) / n;
    }
    r.loss = total / n;
    return r;
}

DropoutResult dropout(const Matrix& input, double rate, RngStream& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    DropoutResult r;
    if (!training || rate == 0.0) {
        r.output = input;
        r.mask = Matrix::Ones(input.rows(), input.cols());
        return r;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    r.mask.resize(input.rows(), input.cols());
    for (Index i = 0; i < r.mask.size(); ++i) r.mask.data()[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    r.output = input.cwiseProduct(r.mask);
    return r;
}

void AdamState::validate() const {
    if (!(lr > 0.0)) throw ConfigError("Adam lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("Adam betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

void adam_step(std::span<const ParamView> params, std::span<const GradView> grads, AdamState& s, int epoch) {
    if (params.size() != grads.size()) throw InternalError("adam_step: parameter/gradient block count mismatch");
    if (s.first_moment.empty()) {
        for (const auto& p : params) {
            s.first_moment.push_back(Vector::Zero(static_cast<Index>(p.size())));
            s.second_moment.push_back(Vector::Zero(static_cast<Index>(p.size())));
        }
    }
    if (s.first_moment.size() != params.size()) throw InternalError("adam_step: optimizer state has wrong block count");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (grads[b].size() != params[b].size() || static_cast<std::size_t>(s.first_moment[b].size()) != params[b].size())
            throw InternalError("adam_step: block " + std::to_string(b) + " shape mismatch");
        for (double g : grads[b])
            if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter block " + std::to_string(b), epoch);
    }
    ++s.step_count;
    const double t = static_cast<double>(s.step_count);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    const double coupled = s.decoupled_weight_decay ? 0.0 : s.weight_decay;
    const double shrink = s.decoupled_weight_decay ? 1.0 - s.lr * s.weight_decay : 1.0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        double* p = params[b].data();
        const double* g = grads[b].data();
        double* m = s.first_moment[b].data();
        double* v = s.second_moment[b].data();
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            p[i] *= shrink;
            const double gi = g[i] + coupled * p[i];
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
        }
    }
}

Matrix LayerStack::forward(const Matrix& input, std::vector<DenseCache>* caches) const {
    if (caches) caches->assign(layers.size(), DenseCache{});
    Matrix h = input;
    for (std::size_t i = 0; i < layers.size(); ++i) h = dense_forward(h, layers[i], caches ? &(*caches)[i] : nullptr);
    return h;
}

Matrix LayerStack::backward(const Matrix& grad_output, const std::vector<DenseCache>& caches,
                            std::vector<DenseGrads>& grads) const {
    if (caches.size() != layers.size()) throw InternalError("LayerStack::backward: cache count mismatch");
    grads.assign(layers.size(), DenseGrads{});
    Matrix g = grad_output;
    for (std::size_t i = layers.size(); i-- > 0;) {
        grads[i] = dense_backward(g, caches[i], layers[i]);
        g = std::move(grads[i].input);
    }
    return g;
}

std::vector<ParamView> LayerStack::parameters() {
    std::vector<ParamView> out;
    for (auto& l : layers) {
        out.push_back(view(l.weights));
        out.push_back(view(l.bias));
    }
    return out;
}

std::vector<GradView> LayerStack::grad_views(const std::vector<DenseGrads>& grads) {
    std::vector<GradView> out;
    for (const auto& g : grads) {
        out.push_back(cview(g.weights));
        out.push_back(cview(g.bias));
    }
    return out;
}

std::size_t LayerStack::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParamView> params,
                           std::span<const GradView> analytic, double step, double floor) {
    if (params.size() != analytic.size()) throw InternalError("grad_check: block count mismatch");
    GradCheckResult worst;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != analytic[b].size()) throw InternalError("grad_check: block size mismatch");
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            double& p = params[b][i];
            const double saved = p;
            p = saved + step;
            const double up = loss();
            p = saved - step;
            const double down = loss();
            p = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[b][i];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            if (err > worst.max_relative_error) worst = {err, b, i};
        }
    }
    return worst;
}

}  // namespace decgnn
