#include "reid/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "reid/error.hpp"

namespace reid {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, result.ptr);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string write_features_csv(const std::vector<FeatureRow>& rows) {
    const std::size_t dim = rows.empty() ? 0 : rows.front().values.size();
    std::string out = "id";
    for (std::size_t j = 0; j < dim; ++j) out += ",f" + std::to_string(j);
    out += '\n';
    for (const auto& r : rows) {
        if (r.values.size() != dim) throw ConsistencyError("feature rows differ in length");
        out += r.id;
        for (double v : r.values) out += "," + format_double(v);
        out += '\n';
    }
    return out;
}

std::vector<FeatureRow> read_features_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    bool header = false;
    std::vector<FeatureRow> rows;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cols.push_back(cell);
        if (!header) {
            if (cols.empty() || cols.front() != "id") throw ParseError("features: header must start with id", line_no);
            dim = cols.size() - 1;
            header = true;
            continue;
        }
        if (cols.size() != dim + 1) throw ParseError("features: expected " + std::to_string(dim + 1) + " columns", line_no);
        FeatureRow row{cols[0], {}};
        for (std::size_t j = 1; j < cols.size(); ++j) {
            char* end = nullptr;
            const double v = std::strtod(cols[j].c_str(), &end);
            if (end == cols[j].c_str() || *end != '\0') throw ParseError("features: bad number " + cols[j], line_no);
            if (!(v >= 0.0 && v <= 1.0)) throw ParseError("features: value outside [0, 1]", line_no);
            row.values.push_back(v);
        }
        if (!ids.insert(row.id).second) throw ConsistencyError("features: duplicate id " + row.id);
        rows.push_back(std::move(row));
    }
    if (!header) throw ParseError("features: empty file");
    return rows;
}

void write_dataset(const fs::path& dir, const PairedDataset& dataset, const SnpPanel& panel,
                   const nlohmann::json& manifest) {
    fs::create_directories(dir);
    write_text_file(dir / "genotypes.tsv", serialize_genotype_collection(dataset.genotypes(), panel));
    write_text_file(dir / "phenotypes.csv", write_phenotype_labels(dataset.profiles(), panel));
    const bool has_features = !dataset.individuals.empty() && !dataset.individuals.front().features.empty();
    if (has_features) {
        std::vector<FeatureRow> rows;
        for (const auto& ind : dataset.individuals) rows.push_back({ind.id, ind.features});
        write_text_file(dir / "features.csv", write_features_csv(rows));
    }
    if (dataset.provenance != Provenance::ingested) {
        std::string sources = "id,source_genome\n";
        for (const auto& ind : dataset.individuals) sources += ind.id + "," + ind.source_genome + "\n";
        write_text_file(dir / "sources.csv", sources);
    }
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void apply_features(PairedDataset& dataset, const std::vector<FeatureRow>& rows) {
    std::map<std::string_view, const FeatureRow*> by_id;
    for (const auto& r : rows) by_id.emplace(r.id, &r);
    if (by_id.size() != dataset.individuals.size())
        throw ConsistencyError("features cover " + std::to_string(by_id.size()) + " ids, dataset has " +
                               std::to_string(dataset.individuals.size()));
    for (auto& ind : dataset.individuals) {
        auto it = by_id.find(ind.id);
        if (it == by_id.end()) throw ConsistencyError("no features for " + ind.id);
        ind.features = it->second->values;
    }
}

LoadedDataset read_dataset(const fs::path& dir, const SnpPanel& panel) {
    LoadedDataset out;
    if (fs::exists(dir / "manifest.json")) {
        try {
            out.manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError((dir / "manifest.json").string() + ": " + ex.what());
        }
    }
    const auto genotypes = parse_genotype_collection(read_text_file(dir / "genotypes.tsv"), panel);
    const auto profiles = load_phenotype_labels(read_text_file(dir / "phenotypes.csv"), panel);
    std::map<std::string_view, const GenotypeRecord*> by_id;
    for (const auto& g : genotypes) by_id.emplace(g.individual_id, &g);
    if (genotypes.size() != profiles.size())
        throw ConsistencyError("genotypes.tsv and phenotypes.csv list different numbers of individuals");

    PairedDataset& ds = out.dataset;
    ds.provenance = provenance_from_string(out.manifest.value("provenance", std::string("ingested")));
    ds.seed = out.manifest.value("seed", std::uint64_t{0});
    for (const auto& profile : profiles) {
        auto it = by_id.find(profile.individual_id);
        if (it == by_id.end()) throw ConsistencyError("no genotype for " + profile.individual_id);
        Individual ind;
        ind.id = profile.individual_id;
        ind.profile = profile;
        ind.genotype = *it->second;
        ds.individuals.push_back(std::move(ind));
    }
    if (fs::exists(dir / "features.csv")) apply_features(ds, read_features_csv(read_text_file(dir / "features.csv")));
    if (fs::exists(dir / "sources.csv")) {
        std::istringstream in(read_text_file(dir / "sources.csv"));
        std::string line;
        std::map<std::string, std::string> sources;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            sources[line.substr(0, comma)] = line.substr(comma + 1);
        }
        for (auto& ind : ds.individuals) ind.source_genome = sources[ind.id];
    }
    return out;
}

}  // namespace reid
