#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reid/classifier.hpp"
#include "reid/matcher.hpp"
#include "reid/panel.hpp"
#include "reid/parallel.hpp"
#include "reid/pheno_model.hpp"
#include "reid/synth.hpp"

namespace reid::testing {

/// Sizes and seeds of the default synthetic world: a labelled genotype pool
/// standing in for the public repository, 456 paired individuals and a
/// separate labelled feature set for classifier training.
struct FixtureSpec {
    std::uint64_t world_seed = 1;
    std::size_t pool_size = 1200;
    std::uint64_t pool_seed = 11;
    std::size_t count = 456;
    std::uint64_t profile_seed = 21;
    std::uint64_t feature_seed = 41;
    std::size_t train_count = 20000;
    std::uint64_t train_profile_seed = 51;
    std::uint64_t train_feature_seed = 61;
    FeatureConfig features;
    TrainConfig train;
};

struct Fixture {
    SnpPanel panel;
    ConditionalModel model;
    PairedDataset data;
    PairedDataset train_data;
    ClassifierSet classifiers;
    std::vector<PhenotypeProfile> predicted;
};

inline PairedDataset labelled_features(const std::vector<PhenotypeProfile>& profiles, const SnpPanel& panel,
                                       const FeatureConfig& features, std::uint64_t seed) {
    PairedDataset out;
    out.seed = seed;
    const auto x = generate_features(profiles, panel, features, seed);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        Individual ind;
        ind.id = profiles[i].individual_id;
        ind.profile = profiles[i];
        ind.features = x[i];
        out.individuals.push_back(std::move(ind));
    }
    return out;
}

inline std::vector<PhenotypeProfile> predict_all(const ClassifierSet& cs, const PairedDataset& data,
                                                 const std::vector<FeatureVector>& features) {
    std::vector<PhenotypeProfile> out;
    for (std::size_t i = 0; i < features.size(); ++i)
        out.push_back(predict_profile(cs, data.individuals[i].id, features[i]));
    return out;
}

inline Fixture build_fixture(const FixtureSpec& spec = {}) {
    SnpPanel panel = SnpPanel::default_panel();
    const auto world = default_population_model(panel, spec.world_seed);
    const auto pool = generate_pool(world, panel, spec.pool_size, spec.pool_seed);
    std::vector<GenotypeRecord> genotypes;
    std::vector<PhenotypeProfile> labels;
    for (const auto& m : pool) {
        genotypes.push_back(m.genotype);
        labels.push_back(m.profile);
    }
    ConditionalModel model = ConditionalModel::fit(genotypes, labels, panel);
    PairedDataset data = pair_ideal(sample_profiles(pool, spec.count, spec.profile_seed), pool, model);
    const auto x = generate_features(data.profiles(), panel, spec.features, spec.feature_seed);
    for (std::size_t i = 0; i < x.size(); ++i) data.individuals[i].features = x[i];

    PairedDataset train_data = labelled_features(sample_profiles(pool, spec.train_count, spec.train_profile_seed, "t"),
                                                 panel, spec.features, spec.train_feature_seed);
    ClassifierSet cs;
    parallel_for(kNumPhenotypes, [&](std::size_t i) {
        const Phenotype p = kPhenotypes[i];
        cs[i] = train(training_set(train_data, p), p, panel.num_variants(p), spec.train).model;
    });
    auto predicted = predict_all(cs, data, data.features());
    return Fixture{std::move(panel), std::move(model), std::move(data), std::move(train_data), std::move(cs),
                   std::move(predicted)};
}

}  // namespace reid::testing
