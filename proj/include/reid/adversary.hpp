#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "reid/classifier.hpp"
#include "reid/pheno_model.hpp"

namespace reid {

enum class AttackOptimizer { sign_gradient, adam };

struct AttackConfig {
    double epsilon = 0.1;   ///< L-infinity budget on [0, 1] features
    double alpha = 0.0;     ///< sign-gradient step; 0 means epsilon / 10
    std::size_t iterations = 40;
    bool random_start = false;
    AttackOptimizer optimizer = AttackOptimizer::sign_gradient;
    double adam_lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    double step_size() const { return alpha > 0.0 ? alpha : epsilon / 10.0; }
    /// Throws ConfigError; epsilon = 0 is accepted as the empty budget.
    void validate() const;
};

/// Defaults for the score-minimising attack: 100 Adam steps at lr 0.01.
AttackConfig universal_defaults(double epsilon);

/// Which form of the universal objective to minimise:
///   log_prob: sum_p sum_v log g_p(v, x + delta) * log P(v | y)
///   prob:     sum_p sum_v g_p(v, x + delta) * log P(v | y)
enum class UniversalForm { log_prob, prob };

struct Perturbation {
    std::vector<double> delta;

    double linf() const;
    /// x + delta, the perturbed features.
    std::vector<double> apply(std::span<const double> x) const;
};

struct TraceEntry {
    std::size_t iteration = 0;
    double objective = 0.0;
    double linf = 0.0;
};

struct AttackResult {
    Perturbation perturbation;
    std::vector<TraceEntry> trace;  ///< objective at delta = 0 (or the warm start), then after each step
    double initial_objective = 0.0;
    double objective = 0.0;         ///< at the returned perturbation
};

/// Clip delta to [-epsilon, epsilon], then move it so x + delta stays in [0, 1].
void project_box(std::vector<double>& delta, std::span<const double> x, double epsilon);
bool satisfies_box(std::span<const double> delta, std::span<const double> x, double epsilon);

/// Untargeted sign-gradient ascent on the cross-entropy of `true_variant`.
Perturbation pgd_single(const PhenotypeClassifier& model, std::span<const double> x, std::size_t true_variant,
                        const AttackConfig& config);

/// Universal objective at the perturbed input `x_adv`, with the per-variant
/// weights log P(v | y) of the true genome.
double universal_objective(const ClassifierSet& classifiers, std::span<const double> x_adv,
                           const GenomeLikelihoods& weights, UniversalForm form = UniversalForm::log_prob);
std::vector<double> universal_gradient(const ClassifierSet& classifiers, std::span<const double> x_adv,
                                       const GenomeLikelihoods& weights, UniversalForm form = UniversalForm::log_prob);

/// Projected Adam descent on the universal objective starting at delta = 0 or
/// at `warm_start`. Returns the best iterate, so its objective never exceeds
/// the starting one.
AttackResult universal_noise(const ClassifierSet& classifiers, std::span<const double> x, const GenotypeRecord& y_true,
                             const ConditionalModel& model, const AttackConfig& config,
                             UniversalForm form = UniversalForm::log_prob,
                             std::optional<std::span<const double>> warm_start = std::nullopt);

struct AdversarialTrainConfig {
    AttackConfig attack;  ///< random_start is forced on
    TrainConfig train = [] {
        TrainConfig t;
        t.epochs = 1;  // epochs per pass
        return t;
    }();
    std::size_t passes = 5;
    double subset_fraction = 0.5;  ///< share of every mini-batch that is attacked
};

/// Each pass continues training with seed derive_seed(train.seed, {pass}).
/// Before every gradient step a random share of the mini-batch is attacked
/// with random-start pgd_single against the current model, and the perturbed
/// copies join the step with their clean labels. With epsilon = 0 nothing is
/// added, so the result equals plain continued training.
PhenotypeClassifier adversarial_train(const PhenotypeClassifier& model, const TrainingSet& train_data,
                                      const AdversarialTrainConfig& config);

/// Perturbed features for every individual of a dataset.
struct DatasetAttack {
    std::vector<FeatureVector> perturbed;
    std::vector<AttackResult> results;  ///< universal attacks only
};

DatasetAttack attack_dataset_universal(const PairedDataset& dataset, const ClassifierSet& classifiers,
                                       const ConditionalModel& model, const AttackConfig& config,
                                       UniversalForm form = UniversalForm::log_prob);
DatasetAttack attack_dataset_single(const PairedDataset& dataset, const ClassifierSet& classifiers, Phenotype target,
                                    const AttackConfig& config);

nlohmann::json trace_to_json(const std::vector<TraceEntry>& trace);

}  // namespace reid
