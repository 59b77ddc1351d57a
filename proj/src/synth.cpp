#include "reid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "reid/error.hpp"
#include "reid/parallel.hpp"
#include "reid/rng.hpp"

namespace reid {

std::size_t FeatureConfig::offset(Phenotype p) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < index_of(p); ++i) off += dims[i];
    return off;
}

std::size_t FeatureConfig::total_dim() const {
    std::size_t n = 0;
    for (std::size_t d : dims) n += d;
    return n;
}

std::vector<double> variant_center(std::size_t variant, std::size_t num_variants, std::size_t dim, double low,
                                   double high) {
    std::vector<double> c(dim, low);
    for (std::size_t j = 0; j < dim; ++j)
        if (j % num_variants == variant) c[j] = high;
    return c;
}

std::vector<FeatureVector> generate_features(const std::vector<PhenotypeProfile>& profiles, const SnpPanel& panel,
                                             const FeatureConfig& config, std::uint64_t seed) {
    for (Phenotype p : kPhenotypes) {
        if (!(config.sigma[index_of(p)] >= 0.0))
            throw ConfigError("sigma." + std::string(to_string(p)), "must be >= 0");
        if (config.dims[index_of(p)] == 0) throw ConfigError("dims." + std::string(to_string(p)), "must be >= 1");
    }
    if (!(config.center_low >= 0.0 && config.center_low < config.center_high && config.center_high <= 1.0))
        throw ConfigError("centers", "need 0 <= low < high <= 1");
    std::vector<FeatureVector> out(profiles.size());
    parallel_for(profiles.size(), [&](std::size_t i) {
        Rng rng = make_rng(seed, {0xFEA7u, i});
        FeatureVector x;
        x.reserve(config.total_dim());
        for (Phenotype p : kPhenotypes) {
            const auto center = variant_center(profiles[i].variant(p), panel.num_variants(p), config.dims[index_of(p)],
                                               config.center_low, config.center_high);
            const double sigma = config.sigma[index_of(p)];
            std::normal_distribution<double> noise(0.0, 1.0);
            for (double c : center) {
                const double v = sigma > 0.0 ? c + sigma * noise(rng) : c;
                x.push_back(std::clamp(v, 0.0, 1.0));
            }
        }
        out[i] = std::move(x);
    });
    return out;
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::ingested: return "ingested";
        case Provenance::ideal: return "ideal";
        case Provenance::realistic: return "realistic";
    }
    return "?";
}

Provenance provenance_from_string(std::string_view name) {
    if (name == "ingested") return Provenance::ingested;
    if (name == "ideal") return Provenance::ideal;
    if (name == "realistic") return Provenance::realistic;
    throw ParseError("unknown provenance " + std::string(name));
}

std::vector<PhenotypeProfile> PairedDataset::profiles() const {
    std::vector<PhenotypeProfile> out;
    for (const auto& ind : individuals) out.push_back(ind.profile);
    return out;
}

std::vector<GenotypeRecord> PairedDataset::genotypes() const {
    std::vector<GenotypeRecord> out;
    for (const auto& ind : individuals) out.push_back(ind.genotype);
    return out;
}

std::vector<FeatureVector> PairedDataset::features() const {
    std::vector<FeatureVector> out;
    for (const auto& ind : individuals) out.push_back(ind.features);
    return out;
}

std::map<std::string, std::string> PairedDataset::pairing() const {
    std::map<std::string, std::string> out;
    for (const auto& ind : individuals) out.emplace(ind.profile.individual_id, ind.genotype.individual_id);
    return out;
}

std::vector<std::size_t> matching_candidates(const PhenotypeProfile& profile, const GenotypePool& pool) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        const auto& q = pool[j].profile;
        if (q.variant(Phenotype::hair) == profile.variant(Phenotype::hair) &&
            q.variant(Phenotype::eye) == profile.variant(Phenotype::eye) &&
            q.variant(Phenotype::skin) == profile.variant(Phenotype::skin))
            out.push_back(j);
    }
    return out;
}

namespace {

Individual make_individual(const PhenotypeProfile& profile, const PoolMember& member, const SnpPanel& panel) {
    Individual ind;
    ind.id = profile.individual_id;
    ind.profile = profile;
    ind.genotype = member.genotype;
    ind.genotype.individual_id = profile.individual_id;
    ind.genotype.has_y_calls = profile.variant(Phenotype::sex) == panel.male_index();
    ind.source_genome = member.genotype.individual_id;
    return ind;
}

void check_unique_ids(const std::vector<PhenotypeProfile>& profiles) {
    std::set<std::string_view> ids;
    for (const auto& p : profiles)
        if (!ids.insert(p.individual_id).second) throw ConsistencyError("duplicate profile id " + p.individual_id);
}

std::vector<std::size_t> require_candidates(const PhenotypeProfile& profile, const GenotypePool& pool) {
    auto c = matching_candidates(profile, pool);
    if (c.empty())
        throw ConsistencyError("profile " + profile.individual_id +
                               " has no pool genotype with matching hair, eye and skin");
    return c;
}

}  // namespace

PairedDataset pair_ideal(const std::vector<PhenotypeProfile>& profiles, const GenotypePool& pool,
                         const ConditionalModel& model) {
    if (pool.empty()) throw ConsistencyError("genotype pool is empty");
    check_unique_ids(profiles);
    std::vector<GenomeLikelihoods> lik(pool.size());
    parallel_for(pool.size(), [&](std::size_t j) { lik[j] = model.likelihoods(pool[j].genotype); });

    PairedDataset ds;
    ds.provenance = Provenance::ideal;
    for (const auto& profile : profiles) {
        const auto candidates = require_candidates(profile, pool);
        std::size_t best = candidates.front();
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j : candidates) {
            double s = 0.0;
            for (Phenotype p : {Phenotype::hair, Phenotype::eye, Phenotype::skin})
                s += lik[j][index_of(p)][profile.variant(p)];
            if (s > best_score) {
                best_score = s;
                best = j;
            }
        }
        ds.individuals.push_back(make_individual(profile, pool[best], model.panel()));
    }
    return ds;
}

PairedDataset pair_realistic(const std::vector<PhenotypeProfile>& profiles, const GenotypePool& pool,
                             const SnpPanel& panel, std::uint64_t seed) {
    if (pool.empty()) throw ConsistencyError("genotype pool is empty");
    check_unique_ids(profiles);
    PairedDataset ds;
    ds.provenance = Provenance::realistic;
    ds.seed = seed;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto candidates = require_candidates(profiles[i], pool);
        Rng rng = make_rng(seed, {0x5EA1u, i});
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        ds.individuals.push_back(make_individual(profiles[i], pool[candidates[pick(rng)]], panel));
    }
    return ds;
}

PopulationModel default_population_model(const SnpPanel& panel, std::uint64_t world_seed) {
    PopulationModel world;
    world.priors[index_of(Phenotype::sex)] = {0.5, 0.5};
    auto set_prior = [&](Phenotype p, std::vector<double> named) {
        if (named.size() != panel.num_variants(p)) named.assign(panel.num_variants(p), 1.0);
        floor_and_normalize(named, 1e-9);
        world.priors[index_of(p)] = std::move(named);
    };
    // Orders follow the default panel: hair {black, blonde, brown},
    // eye {blue, brown, intermediate}, skin {pale, intermediate, dark}.
    set_prior(Phenotype::hair, {0.30, 0.20, 0.50});
    set_prior(Phenotype::eye, {0.35, 0.45, 0.20});
    set_prior(Phenotype::skin, {0.60, 0.30, 0.10});
    if (panel.num_variants(Phenotype::sex) != 2) throw ConfigError("panel", "sex needs two variants");

    static constexpr std::array<std::pair<char, char>, 4> kAlleles = {{{'A', 'G'}, {'C', 'T'}, {'A', 'C'}, {'G', 'T'}}};
    Rng rng = make_rng(world_seed, {0x3091Du});
    // Alt-allele frequencies sit close to 1/2 so single SNPs carry little
    // signal; the eye SNPs are the weakest individually.
    std::size_t n = 0;
    for (Phenotype p : kPhenotypes) {
        const double half_width = p == Phenotype::eye ? 0.063 : 0.126;
        std::uniform_real_distribution<double> freq(0.5 - half_width, 0.5 + half_width);
        for (const auto& rsid : panel.snps(p)) {
            PopulationModel::Snp snp{rsid, p, kAlleles[n % kAlleles.size()].first,
                                     kAlleles[n % kAlleles.size()].second, {}};
            for (std::size_t v = 0; v < panel.num_variants(p); ++v) snp.alt_frequency.push_back(freq(rng));
            world.snps.push_back(std::move(snp));
            ++n;
        }
    }
    return world;
}

GenotypePool generate_pool(const PopulationModel& world, const SnpPanel& panel, std::size_t size,
                           std::uint64_t seed, const std::string& prefix) {
    GenotypePool pool(size);
    const int width = std::max<int>(5, static_cast<int>(std::to_string(size).size()));
    parallel_for(size, [&](std::size_t i) {
        Rng rng = make_rng(seed, {0x9001u, i});
        std::string id = std::to_string(i + 1);
        id = prefix + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, id.size()), '0') + id;
        PoolMember m;
        m.profile.individual_id = id;
        m.genotype.individual_id = id;
        for (Phenotype p : kPhenotypes) {
            const auto& prior = world.priors[index_of(p)];
            std::discrete_distribution<std::size_t> draw(prior.begin(), prior.end());
            m.profile.variant(p) = draw(rng);
        }
        m.genotype.has_y_calls = m.profile.variant(Phenotype::sex) == panel.male_index();
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (const auto& snp : world.snps) {
            const double f = snp.alt_frequency[m.profile.variant(snp.phenotype)];
            const char a = u(rng) < f ? snp.alt : snp.ref;
            const char b = u(rng) < f ? snp.alt : snp.ref;
            const bool missing = u(rng) < world.missing_rate;
            m.genotype.calls[snp.rsid] = missing ? GenotypeCall::missing() : GenotypeCall(a, b);
        }
        for (const auto& rsid : panel.all_snps()) m.genotype.calls.try_emplace(rsid);
        pool[i] = std::move(m);
    });
    return pool;
}

std::vector<PhenotypeProfile> sample_profiles(const GenotypePool& pool, std::size_t count, std::uint64_t seed,
                                              const std::string& prefix) {
    if (pool.empty()) throw ConsistencyError("genotype pool is empty");
    std::vector<PhenotypeProfile> out(count);
    const int width = std::max<int>(5, static_cast<int>(std::to_string(count).size()));
    Rng rng = make_rng(seed, {0x5A3Du});
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < count; ++i) {
        std::string id = std::to_string(i + 1);
        id = prefix + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, id.size()), '0') + id;
        out[i] = pool[pick(rng)].profile;
        out[i].individual_id = id;
    }
    return out;
}

GenotypePool pool_from(const std::vector<GenotypeRecord>& genotypes, const std::vector<PhenotypeProfile>& labels) {
    std::map<std::string_view, const GenotypeRecord*> by_id;
    for (const auto& g : genotypes) by_id.emplace(g.individual_id, &g);
    GenotypePool pool;
    for (const auto& label : labels) {
        auto it = by_id.find(label.individual_id);
        if (it == by_id.end()) throw ConsistencyError("label " + label.individual_id + " has no genotype record");
        pool.push_back({*it->second, label});
    }
    return pool;
}

}  // namespace reid
