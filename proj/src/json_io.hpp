#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>

#include "decgnn/csv.hpp"
#include "decgnn/errors.hpp"
#include "decgnn/numerics.hpp"

namespace decgnn::detail {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

inline Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols) throw DataError("checkpoint: matrix data length mismatch");
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

inline json layer_to_json(const DenseLayer& l) {
    return {{"activation", l.activation == Activation::ReLU ? "relu" : "identity"},
            {"weights", matrix_to_json(l.weights)},
            {"bias", vector_to_json(l.bias)}};
}

inline DenseLayer layer_from_json(const json& j) {
    DenseLayer l;
    const auto act = j.at("activation").get<std::string>();
    if (act == "relu")
        l.activation = Activation::ReLU;
    else if (act == "identity")
        l.activation = Activation::Identity;
    else
        throw DataError("checkpoint: unknown activation '" + act + "'");
    l.weights = matrix_from_json(j.at("weights"));
    l.bias = vector_from_json(j.at("bias"));
    l.validate();
    return l;
}

inline json stack_to_json(const LayerStack& s) {
    json arr = json::array();
    for (const auto& l : s.layers) arr.push_back(layer_to_json(l));
    return arr;
}

inline LayerStack stack_from_json(const json& j) {
    LayerStack s;
    for (const auto& l : j) s.layers.push_back(layer_from_json(l));
    return s;
}

inline json read_json(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) { csv::write_text(path, j.dump(2) + "\n"); }

}  // namespace decgnn::detail
