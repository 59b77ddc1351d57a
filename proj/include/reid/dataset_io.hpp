#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reid/synth.hpp"

namespace reid {

/// Shortest text that parses back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

struct FeatureRow {
    std::string id;
    FeatureVector values;
};

/// `id,f0,f1,...`; every value must lie in [0, 1].
std::string write_features_csv(const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_csv(const std::string& text);

/// Dataset directory: genotypes.tsv, phenotypes.csv, features.csv (when the
/// individuals carry features), sources.csv (synthetic pairings) and
/// manifest.json.
void write_dataset(const std::filesystem::path& dir, const PairedDataset& dataset, const SnpPanel& panel,
                   const nlohmann::json& manifest);

struct LoadedDataset {
    PairedDataset dataset;
    nlohmann::json manifest;
};

/// Individuals follow the row order of phenotypes.csv. Throws
/// ConsistencyError when files disagree on the set of ids.
LoadedDataset read_dataset(const std::filesystem::path& dir, const SnpPanel& panel);

/// Replaces the features of `dataset` by rows with matching ids.
void apply_features(PairedDataset& dataset, const std::vector<FeatureRow>& rows);

}  // namespace reid
