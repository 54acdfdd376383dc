#pragma once

// Bundle manifest: a JSON file mapping DatasetBundle fields to matrix
// file paths. Relative paths are resolved against the manifest's
// directory.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "oodkit/core.hpp"
#include "oodkit/types.hpp"

namespace oodkit {

inline DatasetBundle load_bundle(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error(manifest_path + ": cannot open manifest");
    nlohmann::json j;
    in >> j;

    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    auto path_of = [&](const nlohmann::json& node, const char* key) {
        if (!node.contains(key))
            throw std::runtime_error(manifest_path + ": missing manifest key '" + key + "'");
        return resolve(node.at(key).get<std::string>());
    };

    DatasetBundle b;
    b.train_orig = load_features(path_of(j, "train_orig"));
    b.train_ft = load_features(path_of(j, "train_ft"));
    b.train_labels = load_labels(path_of(j, "train_labels"));
    if (j.contains("train_logits"))
        b.train_logits = load_logits(resolve(j.at("train_logits").get<std::string>()));
    b.id_test_orig = load_features(path_of(j, "id_test_orig"));
    b.id_test_ft = load_features(path_of(j, "id_test_ft"));
    if (j.contains("id_test_logits"))
        b.id_test_logits = load_logits(resolve(j.at("id_test_logits").get<std::string>()));
    b.id_test_labels = load_labels(path_of(j, "id_test_labels"));

    if (!j.contains("ood_sets") || !j.at("ood_sets").is_array() || j.at("ood_sets").empty())
        throw std::runtime_error(manifest_path + ": manifest needs a non-empty ood_sets array");
    for (const auto& node : j.at("ood_sets")) {
        OodSet set;
        set.name = node.value("name", "ood" + std::to_string(b.ood_sets.size()));
        set.orig = load_features(path_of(node, "orig"));
        set.ft = load_features(path_of(node, "ft"));
        if (node.contains("logits"))
            set.logits = load_logits(resolve(node.at("logits").get<std::string>()));
        b.ood_sets.push_back(std::move(set));
    }
    return b;
}

/// Writes bundle matrices as NPY files under `dir` and a manifest.json
/// referencing them by relative path.
inline std::string save_bundle(const DatasetBundle& b, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);

    nlohmann::json j;
    auto put = [&](const std::string& name, const auto& matrix) {
        save_matrix(matrix, (base / (name + ".npy")).string());
        return name + ".npy";
    };
    j["train_orig"] = put("train_orig", b.train_orig);
    j["train_ft"] = put("train_ft", b.train_ft);
    j["train_labels"] = put("train_labels", b.train_labels);
    if (b.train_logits) j["train_logits"] = put("train_logits", *b.train_logits);
    j["id_test_orig"] = put("id_test_orig", b.id_test_orig);
    j["id_test_ft"] = put("id_test_ft", b.id_test_ft);
    if (b.id_test_logits) j["id_test_logits"] = put("id_test_logits", *b.id_test_logits);
    j["id_test_labels"] = put("id_test_labels", b.id_test_labels);

    j["ood_sets"] = nlohmann::json::array();
    for (const auto& set : b.ood_sets) {
        nlohmann::json node;
        node["name"] = set.name;
        node["orig"] = put(set.name + "_orig", set.orig);
        node["ft"] = put(set.name + "_ft", set.ft);
        if (set.logits) node["logits"] = put(set.name + "_logits", *set.logits);
        j["ood_sets"].push_back(node);
    }

    const std::string manifest_path = (base / "manifest.json").string();
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error(manifest_path + ": cannot write manifest");
    out << j.dump(2) << "\n";
    return manifest_path;
}

}  // namespace oodkit
