#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reid/genotype.hpp"
#include "reid/panel.hpp"

namespace reid {

struct FitOptions {
    double smoothing = 1.0;           ///< add-alpha pseudocount, >= 0
    double probability_floor = 1e-6;  ///< in (0, 1)
};

/// log P(variant | genome) for every phenotype and variant of one genome.
using GenomeLikelihoods = std::array<std::vector<double>, kNumPhenotypes>;

/// Empirical P(variant | SNP call) tables and variant priors. Immutable once
/// built; every stored distribution sums to one and is bounded below by the
/// probability floor.
class ConditionalModel {
public:
    using Distribution = std::vector<double>;
    using SnpTable = std::map<GenotypeCall, Distribution>;

    static ConditionalModel fit(const std::vector<GenotypeRecord>& genotypes,
                                const std::vector<PhenotypeProfile>& labels, const SnpPanel& panel,
                                const FitOptions& options = {});

    /// Re-validates every invariant; throws ParseError on violation.
    static ConditionalModel from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

    /// P(variant | genome) as the raw product over the phenotype's SNPs.
    /// Missing or unseen calls contribute the variant prior. Sex follows the
    /// Y-presence rule. With `normalize_variants` the products are rescaled to
    /// sum to one over the phenotype's variants.
    double variant_given_genome(Phenotype p, std::size_t variant, const GenotypeRecord& y,
                                bool normalize_variants = false) const;
    /// Name-based overload; throws std::invalid_argument on unknown names.
    double variant_given_genome(std::string_view phenotype, std::string_view variant, const GenotypeRecord& y,
                                bool normalize_variants = false) const;

    /// Same quantity in log space for all variants of one phenotype.
    std::vector<double> log_variant_given_genome(Phenotype p, const GenotypeRecord& y,
                                                 bool normalize_variants = false) const;
    GenomeLikelihoods likelihoods(const GenotypeRecord& y, bool normalize_variants = false) const;

    const SnpPanel& panel() const { return panel_; }
    const Distribution& prior(Phenotype p) const { return priors_[index_of(p)]; }
    /// Null when the call was never observed at fit time.
    const Distribution* table(std::string_view rsid, const GenotypeCall& call) const;
    const SnpTable& snp_table(std::string_view rsid) const;
    double smoothing() const { return smoothing_; }
    double probability_floor() const { return floor_; }

private:
    ConditionalModel(SnpPanel panel, double smoothing, double floor);
    void validate() const;

    SnpPanel panel_;
    std::map<std::string, SnpTable, std::less<>> tables_;
    std::array<Distribution, kNumPhenotypes> priors_;
    double smoothing_;
    double floor_;
};

/// Normalises `p` to sum to one with every entry >= floor.
void floor_and_normalize(std::vector<double>& p, double floor);

}  // namespace reid
