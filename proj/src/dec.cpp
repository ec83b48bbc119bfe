#include "decgnn/dec.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <unordered_map>

#include "decgnn/csv.hpp"
#include "decgnn/errors.hpp"

namespace decgnn {
namespace {

int nearest_center(const Matrix& points, Index i, const Matrix& centers, double* dist2) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < centers.rows(); ++j) {
        const double d = (points.row(i) - centers.row(j)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

Matrix kmeanspp_seeds(const Matrix& points, int k, RngStream& rng) {
    const Index n = points.rows();
    Matrix centers(k, points.cols());
    centers.row(0) = points.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points.row(i) - centers.row(c - 1)).squaredNorm());
            total += d2[i];
        }
        Index pick = n - 1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target < 0.0 && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] == 0.0 && pick > 0) --pick;
        } else {
            pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centers.row(c) = points.row(pick);
    }
    return centers;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iter) {
    const Index n = points.rows();
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    if (k > n) throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
    if (!points.allFinite()) throw DataError("kmeans: non-finite input");
    RngStream rng(seed, "kmeans/k=" + std::to_string(k));

    KMeansResult r;
    r.centers = kmeanspp_seeds(points, k, rng);
    r.assignments.assign(static_cast<std::size_t>(n), -1);
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            const int a = nearest_center(points, i, r.centers, &d2[i]);
            if (a != r.assignments[i]) {
                r.assignments[i] = a;
                changed = true;
            }
        }
        r.iterations = it + 1;
        if (!changed && it > 0) break;

        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(r.assignments[i]) += points.row(i);
            ++counts[r.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                r.centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
                continue;
            }
            // Empty cluster: take the point farthest from its own center.
            Index far = 0;
            double far_d = -1.0;
            for (Index i = 0; i < n; ++i) {
                const double d = (points.row(i) - r.centers.row(r.assignments[i])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            r.centers.row(c) = points.row(far);
            --counts[r.assignments[far]];
            r.assignments[far] = c;
            counts[c] = 1;
        }
    }
    r.inertia = 0.0;
    for (Index i = 0; i < n; ++i) r.inertia += (points.row(i) - r.centers.row(r.assignments[i])).squaredNorm();
    return r;
}

Matrix soft_assign(const Matrix& z, const Matrix& centers) {
    if (z.cols() != centers.cols())
        throw ConfigError("soft_assign: embedding dim " + std::to_string(z.cols()) + " vs center dim " +
                          std::to_string(centers.cols()));
    Matrix q(z.rows(), centers.rows());
    for (Index i = 0; i < z.rows(); ++i) {
        for (Index j = 0; j < centers.rows(); ++j) q(i, j) = 1.0 / (1.0 + (z.row(i) - centers.row(j)).squaredNorm());
        q.row(i) /= q.row(i).sum();
    }
    return q;
}

Matrix target_distribution(const Matrix& q) {
    const Vector f = q.colwise().sum().transpose();
    Matrix p(q.rows(), q.cols());
    for (Index i = 0; i < q.rows(); ++i) {
        double total = 0.0;
        for (Index j = 0; j < q.cols(); ++j) {
            p(i, j) = f[j] > 0.0 ? q(i, j) * q(i, j) / f[j] : 0.0;
            total += p(i, j);
        }
        if (total > 0.0) p.row(i) /= total;
    }
    return p;
}

double kl_divergence(const Matrix& p, const Matrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) throw ConfigError("kl_divergence: shape mismatch");
    if (p.rows() == 0) return 0.0;
    double total = 0.0;
    for (Index i = 0; i < p.rows(); ++i)
        for (Index j = 0; j < p.cols(); ++j) {
            const double pij = p(i, j);
            if (pij > 0.0) total += pij * (std::log(pij) - std::log(std::max(q(i, j), 1e-12)));
        }
    return total / static_cast<double>(p.rows());
}

std::vector<int> hard_assignments(const Matrix& q) {
    std::vector<int> a(static_cast<std::size_t>(q.rows()));
    for (Index i = 0; i < q.rows(); ++i) {
        Index best = 0;
        q.row(i).maxCoeff(&best);  // first maximal index on ties
        a[i] = static_cast<int>(best);
    }
    return a;
}

DecGrads dec_loss_and_grads(const Matrix& z, const Matrix& centers, const Matrix& p) {
    const Index n = z.rows(), k = centers.rows();
    Matrix w(n, k);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < k; ++j) w(i, j) = 1.0 / (1.0 + (z.row(i) - centers.row(j)).squaredNorm());
    Matrix q = w;
    for (Index i = 0; i < n; ++i) q.row(i) /= q.row(i).sum();

    DecGrads g;
    g.loss = kl_divergence(p, q);
    g.z = Matrix::Zero(n, z.cols());
    g.centers = Matrix::Zero(k, z.cols());
    const double scale = 2.0 / static_cast<double>(n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < k; ++j) {
            const double c = scale * w(i, j) * (p(i, j) - q(i, j));
            const auto diff = (z.row(i) - centers.row(j)).eval();
            g.z.row(i) += c * diff;
            g.centers.row(j) -= c * diff;
        }
    return g;
}

double silhouette_score(const Matrix& points, std::span<const int> assignments) {
    const Index n = points.rows();
    if (static_cast<Index>(assignments.size()) != n) throw ConfigError("silhouette: assignment count mismatch");
    std::map<int, int> compact;
    for (int a : assignments) compact.emplace(a, 0);
    if (compact.size() < 2) throw DataError("silhouette is undefined for fewer than two clusters");
    int next = 0;
    for (auto& [label, idx] : compact) idx = next++;
    const int k = next;
    std::vector<int> label(static_cast<std::size_t>(n));
    std::vector<Index> size(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
        label[i] = compact[assignments[i]];
        ++size[label[i]];
    }

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (Index i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Index j = 0; j < n; ++j)
            if (j != i) sums[label[j]] += (points.row(i) - points.row(j)).norm();
        const int own = label[i];
        if (size[own] <= 1) continue;
        const double a = sums[own] / static_cast<double>(size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(size[c]));
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

SweepResult k_sweep(const Matrix& embedding, int k_min, int k_max, std::uint64_t seed, int k_min_useful,
                    int threads) {
    if (k_min < 2 || k_max < k_min)
        throw ConfigError("k_sweep: invalid range " + std::to_string(k_min) + ".." + std::to_string(k_max));
    if (k_max > embedding.rows())
        throw ConfigError("k_sweep: k_max " + std::to_string(k_max) + " exceeds point count " +
                          std::to_string(embedding.rows()));
    const int count = k_max - k_min + 1;
    std::vector<double> scores(static_cast<std::size_t>(count));
    auto eval = [&](int idx) {
        const int k = k_min + idx;
        const auto km = kmeans(embedding, k, seed);
        scores[idx] = silhouette_score(embedding, km.assignments);
    };
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) eval(i);
    } else {
        for (int start = 0; start < count; start += threads) {
            std::vector<std::future<void>> jobs;
            for (int i = start; i < std::min(count, start + threads); ++i)
                jobs.push_back(std::async(std::launch::async, eval, i));
            for (auto& j : jobs) j.get();
        }
    }

    SweepResult r;
    for (int i = 0; i < count; ++i) r.curve.emplace_back(k_min + i, scores[i]);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i) {
        if (r.curve[i].first < k_min_useful) continue;
        const bool left_ok = i == 0 || scores[i] >= scores[i - 1];
        const bool right_ok = i + 1 == count || scores[i] >= scores[i + 1];
        if (left_ok && right_ok && scores[i] > best) {
            best = scores[i];
            r.selected_k = r.curve[i].first;
        }
    }
    if (r.selected_k == 0) {
        for (int i = 0; i < count; ++i)
            if (scores[i] > best) {
                best = scores[i];
                r.selected_k = r.curve[i].first;
            }
    }
    return r;
}

void DecConfig::validate() const {
    if (k == 1) throw ConfigError("DEC with k = 1 is degenerate: silhouette is undefined");
    if (k < 2) throw ConfigError("DEC needs k >= 2");
    if (!(lr > 0.0)) throw ConfigError("DEC lr must be positive");
    if (update_interval < 1) throw ConfigError("DEC update_interval must be >= 1");
    if (!(tol >= 0.0)) throw ConfigError("DEC tol must be >= 0");
    if (max_epochs < 1) throw ConfigError("DEC max_epochs must be >= 1");
}

DecResult train_dec(const Autoencoder& model, const FeatureTable& table, const DecConfig& cfg) {
    cfg.validate();
    if (!table.fully_observed()) throw DataError("train_dec: table must be fully observed");
    if (static_cast<Index>(table.cols()) != model.spec.input_dim) throw ConfigError("train_dec: feature width mismatch");
    if (cfg.k > static_cast<int>(table.rows()))
        throw ConfigError("train_dec: k = " + std::to_string(cfg.k) + " exceeds drug count");

    DecResult res;
    res.model = model;
    LayerStack& encoder = res.model.encoder;
    const Matrix& x = table.values;

    const Matrix z0 = encoder.forward(x);
    res.initial = kmeans(z0, cfg.k, cfg.seed);
    res.initial_silhouette = silhouette_score(z0, res.initial.assignments);
    Matrix centers = res.initial.centers;
    std::vector<int> previous = res.initial.assignments;

    AdamState adam;
    adam.lr = cfg.lr;
    adam.validate();

    Matrix p;
    std::vector<DenseCache> caches;
    std::vector<DenseGrads> grads;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const Matrix z = encoder.forward(x, &caches);
        if (epoch % cfg.update_interval == 0) {
            const Matrix q = soft_assign(z, centers);
            p = target_distribution(q);
            const auto current = hard_assignments(q);
            res.update_epochs.push_back(epoch);
            if (epoch > 0) {
                std::size_t changed = 0;
                for (std::size_t i = 0; i < current.size(); ++i) changed += current[i] != previous[i];
                const double frac = static_cast<double>(changed) / static_cast<double>(current.size());
                res.change_fractions.push_back(frac);
                if (frac < cfg.tol) {
                    res.converged = true;
                    break;
                }
            }
            previous = current;
        }
        auto g = dec_loss_and_grads(z, centers, p);
        if (!std::isfinite(g.loss)) throw TrainingError("DEC KL loss is not finite", epoch);
        res.kl_history.push_back(g.loss);
        encoder.backward(g.z, caches, grads);
        auto params = encoder.parameters();
        params.push_back(view(centers));
        auto gv = LayerStack::grad_views(grads);
        gv.push_back(cview(g.centers));
        adam_step(params, gv, adam, epoch);
        res.epochs = epoch + 1;
    }

    const Matrix z = encoder.forward(x);
    if (!z.allFinite() || !centers.allFinite()) throw TrainingError("DEC produced non-finite embeddings", res.epochs);
    res.embedding = {table.chemical_ids, z};
    res.clusters.centers = centers;
    res.clusters.q = soft_assign(z, centers);
    res.clusters.p = target_distribution(res.clusters.q);
    res.clusters.assignments = hard_assignments(res.clusters.q);
    res.clusters.silhouette = silhouette_score(z, res.clusters.assignments);
    return res;
}

ClusterPartition partition_clusters(const LatentEmbedding& embedding, std::span<const int> assignments,
                                    const LinkTable& links) {
    if (assignments.size() != embedding.chemical_ids.size())
        throw ConfigError("partition_clusters: assignment count does not match drug count");
    std::map<int, std::size_t> slot;
    for (int a : assignments) slot.emplace(a, 0);
    ClusterPartition part;
    for (auto& [cid, idx] : slot) {
        idx = part.clusters.size();
        part.clusters.push_back(ClusterSubset{cid, {}, {}, {}});
    }
    std::vector<std::vector<Index>> rows(part.clusters.size());
    std::unordered_map<std::string, std::size_t> drug_slot;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const std::size_t s = slot[assignments[i]];
        rows[s].push_back(static_cast<Index>(i));
        part.clusters[s].drug_ids.push_back(embedding.chemical_ids[i]);
        drug_slot.emplace(embedding.chemical_ids[i], s);
    }
    for (std::size_t s = 0; s < part.clusters.size(); ++s) {
        Matrix m(static_cast<Index>(rows[s].size()), embedding.vectors.cols());
        for (std::size_t r = 0; r < rows[s].size(); ++r) m.row(static_cast<Index>(r)) = embedding.vectors.row(rows[s][r]);
        part.clusters[s].latent = std::move(m);
    }
    for (const auto& link : links.records) {
        auto it = drug_slot.find(link.first);
        if (it == drug_slot.end())
            throw DataError("partition_clusters: link references unassigned drug '" + link.first + "'");
        part.clusters[it->second].links.records.push_back(link);
    }
    return part;
}

void save_clusters(const std::vector<std::string>& ids, std::span<const int> assignments,
                   const std::filesystem::path& path) {
    std::string out = "chemical_id,cluster_id\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out += csv::escape(ids[i]) + "," + std::to_string(assignments[i]) + "\n";
    csv::write_text(path, out);
}

std::vector<std::pair<std::string, int>> load_clusters(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines[0] != "chemical_id,cluster_id")
        throw DataError(path.string() + ": header must be chemical_id,cluster_id");
    std::vector<std::pair<std::string, int>> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split_line(lines[i]);
        double v = 0.0;
        if (f.size() != 2 || !csv::parse_double(f[1], v))
            throw DataError(path.string() + ": bad row at line " + std::to_string(i + 1));
        out.emplace_back(f[0], static_cast<int>(v));
    }
    return out;
}

void save_sweep(const SweepResult& sweep, const std::filesystem::path& path) {
    std::string out = "k,silhouette\n";
    for (const auto& [k, s] : sweep.curve) out += std::to_string(k) + "," + csv::format_double(s) + "\n";
    csv::write_text(path, out);
}

}  // namespace decgnn
