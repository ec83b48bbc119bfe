#include "decgnn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "decgnn/csv.hpp"
#include "decgnn/errors.hpp"

namespace decgnn {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FeatureColumn parse_column_header(const std::string& field, const std::filesystem::path& path) {
    FeatureColumn col;
    const auto colon = field.rfind(':');
    if (colon == std::string::npos) {
        col.name = field;
        return col;
    }
    col.name = field.substr(0, colon);
    const std::string kind = field.substr(colon + 1);
    if (kind == "num") {
        col.kind = FeatureKind::Numeric;
    } else if (kind == "cat") {
        col.kind = FeatureKind::Categorical;
    } else {
        throw DataError(path.string() + ": column '" + field + "' has unknown type annotation '" + kind +
                        "' (expected num or cat)");
    }
    return col;
}

std::string column_header(const FeatureColumn& col) {
    return col.name + (col.kind == FeatureKind::Numeric ? ":num" : ":cat");
}

// Parses a feature CSV whose first `id_cols` columns are identifiers.
FeatureTable parse_table(const std::vector<std::string>& lines, const std::filesystem::path& path, int id_cols,
                         std::vector<std::string>* second_ids) {
    if (lines.empty()) throw DataError(path.string() + ": empty file, header row required");
    const auto header = csv::split_line(lines[0]);
    if (static_cast<int>(header.size()) < id_cols || header[0] != "chemical_id")
        throw DataError(path.string() + ": header must start with chemical_id");
    if (id_cols == 2 && header[1] != "disease_id")
        throw DataError(path.string() + ": joined header must start with chemical_id,disease_id");

    FeatureTable t;
    for (std::size_t c = id_cols; c < header.size(); ++c) t.columns.push_back(parse_column_header(header[c], path));
    const std::size_t d = t.columns.size();

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split_line(lines[i]);
        if (fields.size() != header.size())
            throw DataError(path.string() + ": line " + std::to_string(i + 1) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(header.size()));
        rows.push_back(std::move(fields));
        line_numbers.push_back(i + 1);
    }

    const std::size_t n = rows.size();
    t.values = Matrix::Constant(static_cast<Index>(n), static_cast<Index>(d), kNaN);
    t.observed = BoolMatrix::Constant(static_cast<Index>(n), static_cast<Index>(d), false);
    for (std::size_t c = 0; c < d; ++c)
        if (t.columns[c].kind == FeatureKind::Categorical) t.pending_text[c].assign(n, std::string());

    for (std::size_t r = 0; r < n; ++r) {
        t.chemical_ids.push_back(rows[r][0]);
        if (second_ids) second_ids->push_back(rows[r][1]);
        for (std::size_t c = 0; c < d; ++c) {
            const std::string& cell = rows[r][c + id_cols];
            if (cell.empty()) continue;
            const auto ri = static_cast<Index>(r), ci = static_cast<Index>(c);
            t.observed(ri, ci) = true;
            if (t.columns[c].kind == FeatureKind::Categorical) {
                t.pending_text[c][r] = cell;
            } else if (!csv::parse_double(cell, t.values(ri, ci))) {
                throw DataError(path.string() + ": line " + std::to_string(line_numbers[r]) + ", column '" +
                                t.columns[c].name + "': cannot parse '" + cell + "' as a finite number");
            }
        }
    }
    return t;
}

FeatureTable select_rows(const FeatureTable& t, const std::vector<std::size_t>& keep) {
    FeatureTable out;
    out.columns = t.columns;
    out.values.resize(static_cast<Index>(keep.size()), t.values.cols());
    out.observed.resize(static_cast<Index>(keep.size()), t.observed.cols());
    for (const auto& [c, text] : t.pending_text) out.pending_text[c].reserve(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto src = static_cast<Index>(keep[i]);
        out.chemical_ids.push_back(t.chemical_ids[keep[i]]);
        out.values.row(static_cast<Index>(i)) = t.values.row(src);
        out.observed.row(static_cast<Index>(i)) = t.observed.row(src);
        for (const auto& [c, text] : t.pending_text) out.pending_text[c].push_back(text[keep[i]]);
    }
    return out;
}

}  // namespace

double FeatureTable::completeness(std::size_t row) const {
    if (cols() == 0) return 1.0;
    return static_cast<double>(observed.row(static_cast<Index>(row)).count()) / static_cast<double>(cols());
}

std::unordered_map<std::string, std::size_t> FeatureTable::id_index() const {
    std::unordered_map<std::string, std::size_t> idx;
    idx.reserve(chemical_ids.size());
    for (std::size_t i = 0; i < chemical_ids.size(); ++i) idx.emplace(chemical_ids[i], i);
    return idx;
}

void FeatureTable::validate() const {
    const auto n = static_cast<Index>(rows());
    const auto d = static_cast<Index>(cols());
    if (values.rows() != n || values.cols() != d || observed.rows() != n || observed.cols() != d)
        throw DataError("feature table: values/mask shape does not match ids and columns");
    std::set<std::string> seen;
    for (const auto& id : chemical_ids)
        if (!seen.insert(id).second) throw DataError("feature table: duplicate chemical_id '" + id + "'");
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < d; ++c) {
            const bool pending = pending_text.count(static_cast<std::size_t>(c)) != 0;
            if (observed(r, c) && !pending && !std::isfinite(values(r, c)))
                throw DataError("feature table: non-finite observed value for '" + chemical_ids[r] + "', column '" +
                                columns[c].name + "'");
        }
}

void LinkTable::deduplicate() {
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::pair<std::string, std::string>> out;
    for (auto& r : records)
        if (seen.insert(r).second) out.push_back(r);
    records = std::move(out);
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
    FeatureTable t = parse_table(csv::read_lines(path), path, 1, nullptr);
    std::set<std::string> seen;
    for (const auto& id : t.chemical_ids)
        if (!seen.insert(id).second) throw DataError(path.string() + ": duplicate chemical_id '" + id + "'");
    t.validate();
    return t;
}

void save_feature_table(const FeatureTable& t, const std::filesystem::path& path) {
    std::string out = "chemical_id";
    for (const auto& c : t.columns) out += "," + csv::escape(column_header(c));
    out += '\n';
    std::vector<std::vector<std::string>> decoded(t.cols());
    for (std::size_t c = 0; c < t.cols(); ++c)
        if (t.columns[c].kind == FeatureKind::Categorical) decoded[c] = decode_categorical(t, c);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        std::vector<std::string> fields{t.chemical_ids[r]};
        for (std::size_t c = 0; c < t.cols(); ++c) {
            const auto ri = static_cast<Index>(r), ci = static_cast<Index>(c);
            if (!t.observed(ri, ci))
                fields.emplace_back();
            else if (t.columns[c].kind == FeatureKind::Categorical)
                fields.push_back(decoded[c][r]);
            else
                fields.push_back(csv::format_double(t.values(ri, ci)));
        }
        out += csv::join(fields) + '\n';
    }
    csv::write_text(path, out);
}

LinkTable load_link_table(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw DataError(path.string() + ": empty file, header row required");
    const auto header = csv::split_line(lines[0]);
    if (header.size() != 2 || header[0] != "chemical_id" || header[1] != "disease_id")
        throw DataError(path.string() + ": header must be chemical_id,disease_id");
    LinkTable links;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = csv::split_line(lines[i]);
        if (f.size() != 2 || f[0].empty() || f[1].empty())
            throw DataError(path.string() + ": line " + std::to_string(i + 1) + " is not a chemical_id,disease_id pair");
        links.records.emplace_back(std::move(f[0]), std::move(f[1]));
    }
    return links;
}

void save_link_table(const LinkTable& links, const std::filesystem::path& path) {
    std::string out = "chemical_id,disease_id\n";
    for (const auto& [c, d] : links.records) out += csv::escape(c) + "," + csv::escape(d) + "\n";
    csv::write_text(path, out);
}

FilterResult filter_completeness(const FeatureTable& table, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("completeness threshold must be in [0, 1], got " + std::to_string(threshold));
    std::vector<std::size_t> keep;
    FilterResult res;
    const double d = static_cast<double>(table.cols());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const double observed = static_cast<double>(table.observed.row(static_cast<Index>(r)).count());
        // Count-based comparison so 7 of 10 passes a 0.70 threshold exactly.
        if (table.cols() == 0 || observed >= threshold * d - 1e-9)
            keep.push_back(r);
        else
            res.dropped_ids.push_back(table.chemical_ids[r]);
    }
    res.table = select_rows(table, keep);
    if (keep.empty() && table.rows() > 0)
        res.warning = "completeness filter at " + std::to_string(threshold) + " removed all " +
                      std::to_string(table.rows()) + " rows";
    return res;
}

double shared_column_distance(const FeatureTable& t, std::size_t a, std::size_t b) {
    double sum = 0.0;
    std::size_t shared = 0;
    const auto ra = static_cast<Index>(a), rb = static_cast<Index>(b);
    for (std::size_t c = 0; c < t.cols(); ++c) {
        if (t.columns[c].kind != FeatureKind::Numeric) continue;
        const auto ci = static_cast<Index>(c);
        if (!t.observed(ra, ci) || !t.observed(rb, ci)) continue;
        const double diff = t.values(ra, ci) - t.values(rb, ci);
        sum += diff * diff;
        ++shared;
    }
    if (shared == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(sum / static_cast<double>(shared));
}

FeatureTable knn_impute(const FeatureTable& table, std::size_t k) {
    if (k < 1) throw ConfigError("knn_impute: k must be >= 1");
    for (const auto& [c, text] : table.pending_text)
        throw DataError("knn_impute: categorical column '" + table.columns[c].name +
                        "' must be enumerated before imputation");
    const std::size_t n = table.rows();
    for (std::size_t c = 0; c < table.cols(); ++c)
        if (n > 0 && !table.observed.col(static_cast<Index>(c)).any())
            throw DataError("knn_impute: column '" + table.columns[c].name + "' is observed in no row");

    FeatureTable out = table;
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto ri = static_cast<Index>(r);
        if (table.observed.row(ri).all()) continue;
        for (std::size_t o = 0; o < n; ++o)
            dist[o] = {o == r ? std::numeric_limits<double>::infinity() : shared_column_distance(table, r, o), o};
        std::sort(dist.begin(), dist.end());  // (distance, index): ties go to the lower index

        for (std::size_t c = 0; c < table.cols(); ++c) {
            const auto ci = static_cast<Index>(c);
            if (table.observed(ri, ci)) continue;
            std::vector<double> donors;
            for (const auto& [d, o] : dist) {
                if (o == r || !table.observed(static_cast<Index>(o), ci)) continue;
                donors.push_back(table.values(static_cast<Index>(o), ci));
                if (donors.size() == k) break;
            }
            double fill = 0.0;
            if (table.columns[c].kind == FeatureKind::Numeric) {
                for (double v : donors) fill += v;
                fill /= static_cast<double>(donors.size());
            } else {
                std::map<double, int> votes;
                for (double v : donors) ++votes[v];
                int best = -1;
                for (const auto& [code, count] : votes)
                    if (count > best) best = count, fill = code;
            }
            out.values(ri, ci) = fill;
            out.observed(ri, ci) = true;
        }
    }
    return out;
}

std::pair<FeatureTable, NormalizationStats> zscore_normalize(const FeatureTable& table) {
    if (!table.fully_observed()) throw DataError("zscore_normalize: table has missing cells; impute first");
    FeatureTable out = table;
    NormalizationStats stats;
    const auto n = static_cast<double>(table.rows());
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const auto ci = static_cast<Index>(c);
        if (table.columns[c].kind != FeatureKind::Numeric || table.rows() == 0) {
            stats.mean.push_back(0.0);
            stats.stddev.push_back(1.0);
            stats.applied.push_back(false);
            continue;
        }
        const double mean = table.values.col(ci).sum() / n;
        const double var = (table.values.col(ci).array() - mean).square().sum() / n;
        double sd = std::sqrt(var);
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) sd = 0.0;
        if (sd == 0.0)
            out.values.col(ci).setZero();
        else
            out.values.col(ci) = (table.values.col(ci).array() - mean) / sd;
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
        stats.applied.push_back(true);
    }
    return {std::move(out), std::move(stats)};
}

FeatureTable inverse_zscore(const FeatureTable& table, const NormalizationStats& stats) {
    if (stats.mean.size() != table.cols()) throw ConfigError("inverse_zscore: stats do not match column count");
    FeatureTable out = table;
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (!stats.applied[c]) continue;
        const auto ci = static_cast<Index>(c);
        out.values.col(ci) = (table.values.col(ci).array() * stats.stddev[c] + stats.mean[c]).matrix();
    }
    return out;
}

FeatureTable enumerate_categoricals(const FeatureTable& table) {
    FeatureTable out = table;
    for (const auto& [c, text] : table.pending_text) {
        auto& col = out.columns[c];
        std::unordered_map<std::string, int> codes;
        for (std::size_t r = 0; r < table.rows(); ++r) {
            const auto ri = static_cast<Index>(r), ci = static_cast<Index>(c);
            if (!table.observed(ri, ci)) continue;
            auto [it, inserted] = codes.emplace(text[r], static_cast<int>(col.categories.size()));
            if (inserted) col.categories.push_back(text[r]);
            out.values(ri, ci) = it->second;
        }
        col.enumerated = true;
    }
    out.pending_text.clear();
    return out;
}

std::vector<std::string> decode_categorical(const FeatureTable& table, std::size_t column) {
    if (column >= table.cols() || table.columns[column].kind != FeatureKind::Categorical)
        throw ConfigError("decode_categorical: column " + std::to_string(column) + " is not categorical");
    if (auto it = table.pending_text.find(column); it != table.pending_text.end()) return it->second;
    const auto& cats = table.columns[column].categories;
    std::vector<std::string> out(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto ri = static_cast<Index>(r), ci = static_cast<Index>(column);
        if (!table.observed(ri, ci)) continue;
        const double v = table.values(ri, ci);
        const auto code = static_cast<long>(std::lround(v));
        if (code < 0 || static_cast<std::size_t>(code) >= cats.size())
            throw DataError("decode_categorical: code " + std::to_string(v) + " out of range in column '" +
                            table.columns[column].name + "'");
        out[r] = cats[static_cast<std::size_t>(code)];
    }
    return out;
}

JoinedRecords load_joined_records(const std::filesystem::path& path) {
    JoinedRecords j;
    j.rows = parse_table(csv::read_lines(path), path, 2, &j.disease_ids);
    return j;
}

UniqueDrugView unique_drug_view(const JoinedRecords& joined) {
    const FeatureTable& t = joined.rows;
    std::unordered_map<std::string, std::size_t> first;
    std::vector<std::size_t> keep;
    UniqueDrugView view;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        if (first.emplace(t.chemical_ids[r], r).second) keep.push_back(r);
        if (r < joined.disease_ids.size() && !joined.disease_ids[r].empty())
            view.links.records.emplace_back(t.chemical_ids[r], joined.disease_ids[r]);
    }
    view.drugs = select_rows(t, keep);
    view.links.deduplicate();
    return view;
}

void SynthConfig::validate() const {
    if (n_clusters < 1 || drugs_per_cluster < 1 || diseases_per_cluster < 1 || feature_dim < 1)
        throw ConfigError("synthetic config: counts and feature_dim must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic config: noise_sigma must be >= 0");
    if (!(link_density_within > 0.0 && link_density_within <= 1.0))
        throw ConfigError("synthetic config: link_density_within must be in (0, 1]");
    if (!(link_density_cross >= 0.0 && link_density_cross < 1.0))
        throw ConfigError("synthetic config: link_density_cross must be in [0, 1)");
    if (!(link_density_within > link_density_cross))
        throw ConfigError("synthetic config: link_density_within must exceed link_density_cross");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0))
        throw ConfigError("synthetic config: missing_rate must be in [0, 1)");
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    RngStream root(cfg.seed, "synthetic");
    RngStream center_rng = root.derive("centers");
    RngStream point_rng = root.derive("points");
    RngStream missing_rng = root.derive("missing");
    RngStream link_rng = root.derive("links");

    const int k = cfg.n_clusters;
    const int d = cfg.feature_dim;
    const double min_sep = 6.0 * cfg.noise_sigma;
    Matrix centers(k, d);
    bool separated = false;
    for (int attempt = 0; attempt < 1000 && !separated; ++attempt) {
        for (Index i = 0; i < centers.size(); ++i) centers.data()[i] = center_rng.normal();
        separated = true;
        for (int a = 0; a < k && separated; ++a)
            for (int b = a + 1; b < k; ++b)
                if ((centers.row(a) - centers.row(b)).norm() < min_sep) {
                    separated = false;
                    break;
                }
    }
    if (!separated)
        throw ConfigError("synthetic config: cannot place " + std::to_string(k) + " centers " +
                          std::to_string(min_sep) + " apart in " + std::to_string(d) + " dimensions");

    SyntheticData out;
    FeatureTable& t = out.features;
    const int n = k * cfg.drugs_per_cluster;
    for (int c = 0; c < d; ++c) t.columns.push_back({"f" + std::to_string(c), FeatureKind::Numeric, {}, false});
    t.values.resize(n, d);
    t.observed = BoolMatrix::Constant(n, d, true);
    char buf[32];
    for (int i = 0; i < n; ++i) {
        const int cluster = i / cfg.drugs_per_cluster;
        std::snprintf(buf, sizeof(buf), "C%05d", i);
        t.chemical_ids.emplace_back(buf);
        out.truth.push_back(cluster);
        for (int c = 0; c < d; ++c) t.values(i, c) = centers(cluster, c) + cfg.noise_sigma * point_rng.normal();
    }
    if (cfg.missing_rate > 0.0) {
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < d; ++c)
                if (missing_rng.bernoulli(cfg.missing_rate)) {
                    t.observed(i, c) = false;
                    t.values(i, c) = kNaN;
                }
    }

    for (int i = 0; i < n; ++i) {
        const int cluster = i / cfg.drugs_per_cluster;
        for (int e = 0; e < k * cfg.diseases_per_cluster; ++e) {
            const int disease_cluster = e / cfg.diseases_per_cluster;
            const double p = disease_cluster == cluster ? cfg.link_density_within : cfg.link_density_cross;
            if (link_rng.uniform() < p) {
                std::snprintf(buf, sizeof(buf), "D%04d", e);
                out.links.records.emplace_back(t.chemical_ids[static_cast<std::size_t>(i)], buf);
            }
        }
    }
    return out;
}

void save_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    save_feature_table(data.features, dir / "features.csv");
    save_link_table(data.links, dir / "links.csv");
    std::string truth = "chemical_id,cluster\n";
    for (std::size_t i = 0; i < data.truth.size(); ++i)
        truth += data.features.chemical_ids[i] + "," + std::to_string(data.truth[i]) + "\n";
    csv::write_text(dir / "truth_clusters.csv", truth);
}

}  // namespace decgnn
