#include "decgnn/decgnn.h"

#include <exception>
#include <new>
#include <span>
#include <string>

#include "decgnn/dec.hpp"
#include "decgnn/errors.hpp"
#include "decgnn/metrics.hpp"
#include "decgnn/pipeline.hpp"

struct dg_session {
    decgnn::PipelineConfig config;
    std::string last_error;
    std::string warnings;
    std::string config_text;
};

namespace {

dg_status to_status(decgnn::ErrorKind k) { return static_cast<dg_status>(static_cast<int>(k)); }

template <class F>
dg_status guarded(dg_session* s, F&& f) {
    if (!s) return DG_ERR_INTERNAL;
    s->last_error.clear();
    try {
        f();
        return DG_OK;
    } catch (const decgnn::Error& e) {
        s->last_error = e.what();
        return to_status(e.kind());
    } catch (const std::bad_alloc&) {
        s->last_error = "out of memory";
    } catch (const std::exception& e) {
        s->last_error = e.what();
    }
    return DG_ERR_INTERNAL;
}

template <class F>
dg_status stateless(F&& f) {
    try {
        f();
        return DG_OK;
    } catch (const decgnn::Error& e) {
        return to_status(e.kind());
    } catch (...) {
        return DG_ERR_INTERNAL;
    }
}

}  // namespace

extern "C" {

const char* dg_version(void) { return decgnn::kVersion; }

dg_status dg_session_create(dg_session** out) {
    if (!out) return DG_ERR_INTERNAL;
    *out = new (std::nothrow) dg_session{};
    return *out ? DG_OK : DG_ERR_INTERNAL;
}

void dg_session_destroy(dg_session* session) { delete session; }

dg_status dg_load_config(dg_session* s, const char* path) {
    return guarded(s, [&] {
        if (!path) throw decgnn::ConfigError("config path is null");
        s->config = decgnn::load_config(path);
    });
}

dg_status dg_set_config_json(dg_session* s, const char* text) {
    return guarded(s, [&] {
        if (!text) throw decgnn::ConfigError("config text is null");
        s->config = decgnn::parse_config(text);
    });
}

dg_status dg_set_option(dg_session* s, const char* key, const char* value) {
    return guarded(s, [&] {
        if (!key || !value) throw decgnn::ConfigError("option key and value must be non-null");
        decgnn::apply_override(s->config, key, value);
    });
}

dg_status dg_set_seed(dg_session* s, uint64_t seed) {
    return guarded(s, [&] { s->config.master_seed = seed; });
}

dg_status dg_set_output_dir(dg_session* s, const char* path) {
    return guarded(s, [&] {
        if (!path || !*path) throw decgnn::ConfigError("output dir must be non-empty");
        s->config.output_dir = path;
    });
}

const char* dg_config_json(dg_session* s) {
    if (!s) return "";
    s->config_text = decgnn::config_to_json(s->config);
    return s->config_text.c_str();
}

dg_status dg_run_stage(dg_session* s, const char* stage) {
    return guarded(s, [&] {
        s->warnings.clear();
        if (!stage) throw decgnn::ConfigError("stage is null");
        for (const auto& r : decgnn::run_stage(s->config, stage))
            for (const auto& w : r.warnings) s->warnings += r.stage + ": " + w + "\n";
    });
}

const char* dg_last_warnings(const dg_session* s) { return s ? s->warnings.c_str() : ""; }

const char* dg_last_error(const dg_session* s) { return s ? s->last_error.c_str() : ""; }

dg_status dg_roc_auc(const double* scores, const int* labels, size_t n, double* out) {
    if (!out || (n > 0 && (!scores || !labels))) return DG_ERR_INTERNAL;
    return stateless([&] { *out = decgnn::roc_auc({scores, n}, {labels, n}); });
}

dg_status dg_silhouette(const double* points, size_t n, size_t dim, const int* assignments, double* out) {
    if (!out || !points || !assignments) return DG_ERR_INTERNAL;
    if (n == 0 || dim == 0) return DG_ERR_DATA;
    return stateless([&] {
        decgnn::Matrix m(static_cast<decgnn::Index>(n), static_cast<decgnn::Index>(dim));
        for (size_t i = 0; i < n * dim; ++i) m.data()[i] = points[i];
        *out = decgnn::silhouette_score(m, std::span<const int>(assignments, n));
    });
}

}  // extern "C"
