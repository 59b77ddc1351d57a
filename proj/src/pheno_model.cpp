#include "reid/pheno_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reid/error.hpp"

namespace reid {

void floor_and_normalize(std::vector<double>& p, double floor) {
    const std::size_t n = p.size();
    if (n == 0) return;
    if (floor * static_cast<double>(n) >= 1.0) throw std::invalid_argument("probability floor too large");
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (!(total > 0.0)) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
        return;
    }
    for (double& v : p) v /= total;

    std::vector<bool> pinned(n, false);
    std::size_t num_pinned = 0;
    while (true) {
        double free_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!pinned[i]) free_sum += p[i];
        const double free_mass = 1.0 - floor * static_cast<double>(num_pinned);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (pinned[i]) continue;
            p[i] *= free_mass / free_sum;
            if (p[i] < floor) {
                p[i] = floor;
                pinned[i] = true;
                ++num_pinned;
                changed = true;
            }
        }
        if (!changed) break;
    }
}

ConditionalModel::ConditionalModel(SnpPanel panel, double smoothing, double floor)
    : panel_(std::move(panel)), smoothing_(smoothing), floor_(floor) {}

ConditionalModel ConditionalModel::fit(const std::vector<GenotypeRecord>& genotypes,
                                       const std::vector<PhenotypeProfile>& labels, const SnpPanel& panel,
                                       const FitOptions& options) {
    if (!(options.smoothing >= 0.0)) throw ConfigError("smoothing", "must be >= 0");
    if (!(options.probability_floor > 0.0 && options.probability_floor < 1.0))
        throw ConfigError("probability_floor", "must lie in (0, 1)");
    if (labels.empty()) throw ConsistencyError("cannot fit a model on zero individuals");
    if (labels.size() < 2) throw ConsistencyError("fitting needs at least two individuals");

    std::map<std::string_view, const GenotypeRecord*> by_id;
    for (const auto& g : genotypes) by_id.emplace(g.individual_id, &g);

    ConditionalModel model(panel, options.smoothing, options.probability_floor);
    const double alpha = options.smoothing;

    using Counts = std::map<GenotypeCall, std::vector<double>>;
    std::map<std::string, Counts, std::less<>> counts;
    std::array<std::vector<double>, kNumPhenotypes> prior_counts;
    for (Phenotype p : kPhenotypes) prior_counts[index_of(p)].assign(panel.num_variants(p), 0.0);

    for (const auto& label : labels) {
        auto it = by_id.find(label.individual_id);
        if (it == by_id.end()) throw ConsistencyError("label " + label.individual_id + " has no genotype record");
        const GenotypeRecord& y = *it->second;
        for (Phenotype p : kPhenotypes) {
            const std::size_t v = label.variant(p);
            if (v >= panel.num_variants(p))
                throw ConsistencyError("label " + label.individual_id + " has an out-of-range variant");
            prior_counts[index_of(p)][v] += 1.0;
            for (const auto& rsid : panel.snps(p)) {
                const GenotypeCall& call = y.call(rsid);
                if (call.is_missing()) continue;
                auto& row = counts[rsid][call];
                if (row.empty()) row.assign(panel.num_variants(p), 0.0);
                row[v] += 1.0;
            }
        }
    }

    auto smooth = [&](const std::vector<double>& c) {
        const double total = std::accumulate(c.begin(), c.end(), 0.0);
        const double denom = total + alpha * static_cast<double>(c.size());
        std::vector<double> d(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) d[i] = denom > 0.0 ? (c[i] + alpha) / denom : 0.0;
        floor_and_normalize(d, options.probability_floor);
        return d;
    };

    for (Phenotype p : kPhenotypes) model.priors_[index_of(p)] = smooth(prior_counts[index_of(p)]);
    for (const auto& rsid : panel.all_snps()) {
        SnpTable& table = model.tables_[rsid];
        if (auto it = counts.find(rsid); it != counts.end())
            for (const auto& [call, row] : it->second) table[call] = smooth(row);
    }
    model.validate();
    return model;
}

const ConditionalModel::Distribution* ConditionalModel::table(std::string_view rsid, const GenotypeCall& call) const {
    auto it = tables_.find(rsid);
    if (it == tables_.end()) return nullptr;
    auto jt = it->second.find(call);
    return jt == it->second.end() ? nullptr : &jt->second;
}

const ConditionalModel::SnpTable& ConditionalModel::snp_table(std::string_view rsid) const {
    auto it = tables_.find(rsid);
    if (it == tables_.end()) throw std::invalid_argument("not a panel SNP: " + std::string(rsid));
    return it->second;
}

std::vector<double> ConditionalModel::log_variant_given_genome(Phenotype p, const GenotypeRecord& y,
                                                               bool normalize_variants) const {
    const std::size_t nv = panel_.num_variants(p);
    std::vector<double> out(nv, 0.0);
    if (p == Phenotype::sex) {
        const std::size_t sex = sex_from_genotype(y, panel_);
        for (std::size_t v = 0; v < nv; ++v) out[v] = std::log(v == sex ? 1.0 - floor_ : floor_);
        return out;
    }
    const Distribution& pr = prior(p);
    for (const auto& rsid : panel_.snps(p)) {
        const GenotypeCall& call = y.call(rsid);
        const Distribution* row = call.is_missing() ? nullptr : table(rsid, call);
        const Distribution& d = row ? *row : pr;
        for (std::size_t v = 0; v < nv; ++v) out[v] += std::log(d[v]);
    }
    if (normalize_variants) {
        const double m = *std::max_element(out.begin(), out.end());
        double s = 0.0;
        for (double l : out) s += std::exp(l - m);
        const double lse = m + std::log(s);
        for (double& l : out) l -= lse;
    }
    return out;
}

double ConditionalModel::variant_given_genome(Phenotype p, std::size_t variant, const GenotypeRecord& y,
                                              bool normalize_variants) const {
    if (variant >= panel_.num_variants(p)) throw std::invalid_argument("variant index out of range");
    if (p == Phenotype::sex) return variant == sex_from_genotype(y, panel_) ? 1.0 - floor_ : floor_;
    if (normalize_variants) return std::exp(log_variant_given_genome(p, y, true)[variant]);
    double product = 1.0;
    const Distribution& pr = prior(p);
    for (const auto& rsid : panel_.snps(p)) {
        const GenotypeCall& call = y.call(rsid);
        const Distribution* row = call.is_missing() ? nullptr : table(rsid, call);
        product *= row ? (*row)[variant] : pr[variant];
    }
    return product;
}

double ConditionalModel::variant_given_genome(std::string_view phenotype, std::string_view variant,
                                              const GenotypeRecord& y, bool normalize_variants) const {
    const auto p = phenotype_from_string(phenotype);
    if (!p) throw std::invalid_argument("unknown phenotype " + std::string(phenotype));
    const auto v = panel_.variant_index(*p, variant);
    if (!v) throw std::invalid_argument("unknown variant " + std::string(variant) + " for " + std::string(phenotype));
    return variant_given_genome(*p, *v, y, normalize_variants);
}

GenomeLikelihoods ConditionalModel::likelihoods(const GenotypeRecord& y, bool normalize_variants) const {
    GenomeLikelihoods out;
    for (Phenotype p : kPhenotypes) out[index_of(p)] = log_variant_given_genome(p, y, normalize_variants);
    return out;
}

void ConditionalModel::validate() const {
    if (!(smoothing_ >= 0.0)) throw ParseError("model: smoothing must be >= 0");
    if (!(floor_ > 0.0 && floor_ < 1.0)) throw ParseError("model: probability floor must lie in (0, 1)");
    auto check = [&](const Distribution& d, std::size_t nv, const std::string& what) {
        if (d.size() != nv) throw ParseError("model: " + what + " has the wrong number of variants");
        double s = 0.0;
        for (double v : d) {
            if (!(v >= floor_ && v <= 1.0)) throw ParseError("model: " + what + " has an entry outside [floor, 1]");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ParseError("model: " + what + " does not sum to 1");
    };
    for (Phenotype p : kPhenotypes) check(priors_[index_of(p)], panel_.num_variants(p), "prior " + std::string(to_string(p)));
    const auto snps = panel_.all_snps();
    if (tables_.size() != snps.size()) throw ParseError("model: tables must cover exactly the panel SNPs");
    for (const auto& rsid : snps) {
        auto it = tables_.find(rsid);
        if (it == tables_.end()) throw ParseError("model: no table for " + rsid);
        const Phenotype p = *panel_.owner(rsid);
        for (const auto& [call, d] : it->second) {
            if (call.is_missing()) throw ParseError("model: table " + rsid + " has a missing-call row");
            check(d, panel_.num_variants(p), "table " + rsid + "/" + call.str());
        }
    }
}

nlohmann::json ConditionalModel::to_json() const {
    nlohmann::json doc;
    doc["panel"] = panel_.to_json();
    doc["smoothing"] = smoothing_;
    doc["probability_floor"] = floor_;
    nlohmann::json priors = nlohmann::json::object();
    for (Phenotype p : kPhenotypes) priors[std::string(to_string(p))] = prior(p);
    doc["priors"] = priors;
    nlohmann::json tables = nlohmann::json::object();
    for (const auto& [rsid, table] : tables_) {
        nlohmann::json rows = nlohmann::json::object();
        for (const auto& [call, d] : table) rows[call.str()] = d;
        tables[rsid] = rows;
    }
    doc["tables"] = tables;
    return doc;
}

ConditionalModel ConditionalModel::from_json(const nlohmann::json& doc) {
    try {
        ConditionalModel model(SnpPanel::from_json(doc.at("panel")), doc.at("smoothing").get<double>(),
                               doc.at("probability_floor").get<double>());
        for (Phenotype p : kPhenotypes)
            model.priors_[index_of(p)] = doc.at("priors").at(std::string(to_string(p))).get<Distribution>();
        for (const auto& [rsid, rows] : doc.at("tables").items()) {
            if (!model.panel_.contains(rsid)) throw ParseError("model: table for non-panel SNP " + rsid);
            SnpTable& table = model.tables_[rsid];
            for (const auto& [call, d] : rows.items()) {
                const GenotypeCall c = GenotypeCall::parse(call);
                if (c.is_missing()) throw ParseError("model: table " + rsid + " has a missing-call row");
                table[c] = d.get<Distribution>();
            }
        }
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("model: ") + ex.what());
    }
}

}  // namespace reid
