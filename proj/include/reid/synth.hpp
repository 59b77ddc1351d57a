#pragma once

#include <array>
#include <map>
#include <cstdint>
#include <string>
#include <vector>

#include "reid/genotype.hpp"
#include "reid/pheno_model.hpp"

namespace reid {

/// Surrogate face image: per-phenotype contiguous blocks, entries in [0, 1].
using FeatureVector = std::vector<double>;

struct FeatureConfig {
    std::array<std::size_t, kNumPhenotypes> dims{8, 8, 8, 8};
    /// Per-phenotype Gaussian noise. The eye value is calibrated so a trained
    /// eye classifier lands near 59% test accuracy.
    std::array<double, kNumPhenotypes> sigma{0.25, 0.225, 0.85, 0.225};
    /// Centre coordinate levels: `high` where a coordinate belongs to the
    /// variant, `low` elsewhere.
    double center_low = 0.3;
    double center_high = 0.7;

    std::size_t offset(Phenotype p) const;
    std::size_t total_dim() const;
};

/// Fixed class centre for one variant block: `high` on coordinates j with
/// j mod num_variants == variant, `low` elsewhere.
std::vector<double> variant_center(std::size_t variant, std::size_t num_variants, std::size_t dim, double low = 0.3,
                                   double high = 0.7);

/// Centre plus N(0, sigma_p) noise per block, clipped to [0, 1]. Individual i
/// draws from its own stream, so the output is a pure function of the inputs.
std::vector<FeatureVector> generate_features(const std::vector<PhenotypeProfile>& profiles, const SnpPanel& panel,
                                             const FeatureConfig& config, std::uint64_t seed);

enum class Provenance { ingested, ideal, realistic };
std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view name);

struct Individual {
    std::string id;
    FeatureVector features;  ///< empty for ingested data
    PhenotypeProfile profile;
    GenotypeRecord genotype;
    std::string source_genome;  ///< pool member the genotype was copied from
};

struct PairedDataset {
    std::vector<Individual> individuals;
    Provenance provenance = Provenance::ingested;
    std::uint64_t seed = 0;

    std::vector<PhenotypeProfile> profiles() const;
    std::vector<GenotypeRecord> genotypes() const;
    std::vector<FeatureVector> features() const;
    /// Identity pairing: each individual's profile belongs to its own genome.
    std::map<std::string, std::string> pairing() const;
};

/// Labelled genotypes standing in for a public genotype repository.
struct PoolMember {
    GenotypeRecord genotype;
    PhenotypeProfile profile;
};
using GenotypePool = std::vector<PoolMember>;

/// Pairs each profile with the pool genotype of identical hair, eye and skin
/// that maximises the product of P(profile_p | y); ties go to the earlier
/// pool member. Sex is not matched; the copied genotype's Y flag follows the
/// profile. Throws ConsistencyError when a profile has no candidate.
PairedDataset pair_ideal(const std::vector<PhenotypeProfile>& profiles, const GenotypePool& pool,
                         const ConditionalModel& model);

/// As pair_ideal, but draws uniformly among the matching candidates.
PairedDataset pair_realistic(const std::vector<PhenotypeProfile>& profiles, const GenotypePool& pool,
                             const SnpPanel& panel, std::uint64_t seed);

/// Indices of pool members whose hair, eye and skin match `profile`.
std::vector<std::size_t> matching_candidates(const PhenotypeProfile& profile, const GenotypePool& pool);

/// Generative model behind synthetic pools: variant priors per phenotype and,
/// per SNP, an alternate-allele frequency for each variant of the owning
/// phenotype (Hardy-Weinberg genotypes).
struct PopulationModel {
    std::array<std::vector<double>, kNumPhenotypes> priors;
    struct Snp {
        std::string rsid;
        Phenotype phenotype;
        char ref;
        char alt;
        std::vector<double> alt_frequency;
    };
    std::vector<Snp> snps;
    double missing_rate = 0.01;
};

PopulationModel default_population_model(const SnpPanel& panel, std::uint64_t world_seed = 1);

/// `size` individuals with ids `<prefix>00001`...
GenotypePool generate_pool(const PopulationModel& world, const SnpPanel& panel, std::size_t size,
                           std::uint64_t seed, const std::string& prefix = "p");

/// Profiles whose phenotypes are copied from uniformly drawn pool members, so
/// each one has at least one pairing candidate.
std::vector<PhenotypeProfile> sample_profiles(const GenotypePool& pool, std::size_t count, std::uint64_t seed,
                                              const std::string& prefix = "s");

GenotypePool pool_from(const std::vector<GenotypeRecord>& genotypes, const std::vector<PhenotypeProfile>& labels);

}  // namespace reid
