#include "reid/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "reid/error.hpp"
#include "reid/parallel.hpp"
#include "reid/rng.hpp"

namespace reid {

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon", "must lie in [0, 1]");
    if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be > 0 (or 0 for epsilon / 10)");
    if (iterations < 1) throw ConfigError("iterations", "must be >= 1");
    if (!(adam_lr > 0.0)) throw ConfigError("adam_lr", "must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
}

AttackConfig universal_defaults(double epsilon) {
    AttackConfig c;
    c.epsilon = epsilon;
    c.iterations = 100;
    c.optimizer = AttackOptimizer::adam;
    c.adam_lr = 0.01;
    return c;
}

double Perturbation::linf() const {
    double m = 0.0;
    for (double d : delta) m = std::max(m, std::abs(d));
    return m;
}

std::vector<double> Perturbation::apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + delta[j];
    return out;
}

void project_box(std::vector<double>& delta, std::span<const double> x, double epsilon) {
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < delta.size(); ++j) {
        double d = std::clamp(delta[j], -epsilon, epsilon);
        if (x[j] + d > 1.0) d = 1.0 - x[j];
        if (x[j] + d < 0.0) d = -x[j];
        // The subtractions above can round one ulp past a bound.
        while (x[j] + d > 1.0) d = std::nextafter(d, -inf);
        while (x[j] + d < 0.0) d = std::nextafter(d, inf);
        while (std::abs(d) > epsilon) d = std::nextafter(d, 0.0);
        delta[j] = d;
    }
}

bool satisfies_box(std::span<const double> delta, std::span<const double> x, double epsilon) {
    if (delta.size() != x.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = x[j] + delta[j];
        if (!(std::abs(delta[j]) <= epsilon) || !(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

namespace {

void assert_box(const std::vector<double>& delta, std::span<const double> x, double epsilon) {
    if (!satisfies_box(delta, x, epsilon)) throw std::logic_error("perturbation left the feasible box");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Perturbation pgd_single(const PhenotypeClassifier& model, std::span<const double> x, std::size_t true_variant,
                        const AttackConfig& config) {
    config.validate();
    if (config.optimizer != AttackOptimizer::sign_gradient)
        throw ConfigError("optimizer", "single-phenotype PGD uses sign-gradient steps");
    if (x.size() != model.input_dim)
        throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", model expects " +
                                    std::to_string(model.input_dim));
    const Objective ce = Objective::cross_entropy(true_variant, model.num_variants);
    Perturbation p{std::vector<double>(x.size(), 0.0)};
    if (config.epsilon == 0.0) return p;

    if (config.random_start) {
        Rng rng = make_rng(config.seed, {0x57A7u});
        std::uniform_real_distribution<double> u(-config.epsilon, config.epsilon);
        for (double& d : p.delta) d = u(rng);
        project_box(p.delta, x, config.epsilon);
        assert_box(p.delta, x, config.epsilon);
    }
    const double alpha = config.step_size();
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto grad = input_gradient(model, p.apply(x), ce);
        for (std::size_t j = 0; j < x.size(); ++j) p.delta[j] += alpha * sign(grad[j]);
        project_box(p.delta, x, config.epsilon);
        assert_box(p.delta, x, config.epsilon);
    }
    return p;
}

double universal_objective(const ClassifierSet& classifiers, std::span<const double> x_adv,
                           const GenomeLikelihoods& weights, UniversalForm form) {
    double s = 0.0;
    for (Phenotype p : kPhenotypes) {
        const auto& w = weights[index_of(p)];
        const Objective obj = form == UniversalForm::log_prob ? Objective::weighted_log_prob(w)
                                                              : Objective::weighted_prob(w);
        s += evaluate(classifiers[index_of(p)], x_adv, obj);
    }
    return s;
}

std::vector<double> universal_gradient(const ClassifierSet& classifiers, std::span<const double> x_adv,
                                       const GenomeLikelihoods& weights, UniversalForm form) {
    std::vector<double> grad(x_adv.size(), 0.0);
    for (Phenotype p : kPhenotypes) {
        const auto& w = weights[index_of(p)];
        const Objective obj = form == UniversalForm::log_prob ? Objective::weighted_log_prob(w)
                                                              : Objective::weighted_prob(w);
        const auto g = input_gradient(classifiers[index_of(p)], x_adv, obj);
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
    }
    return grad;
}

AttackResult universal_noise(const ClassifierSet& classifiers, std::span<const double> x, const GenotypeRecord& y_true,
                             const ConditionalModel& model, const AttackConfig& config, UniversalForm form,
                             std::optional<std::span<const double>> warm_start) {
    config.validate();
    for (const auto& c : classifiers)
        if (c.input_dim != x.size())
            throw std::invalid_argument("classifier input dimension does not match the features");
    const GenomeLikelihoods weights = model.likelihoods(y_true);
    for (const auto& w : weights)
        for (double v : w)
            if (!std::isfinite(v)) throw ConsistencyError("non-finite log-likelihood in the universal objective");

    auto objective_at = [&](const std::vector<double>& delta) {
        std::vector<double> xa(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) xa[j] = x[j] + delta[j];
        const double v = universal_objective(classifiers, xa, weights, form);
        if (!std::isfinite(v)) throw ConsistencyError("universal objective became non-finite");
        return v;
    };

    AttackResult result;
    std::vector<double> delta(x.size(), 0.0);
    if (warm_start) {
        if (warm_start->size() != x.size()) throw std::invalid_argument("warm start has the wrong dimension");
        delta.assign(warm_start->begin(), warm_start->end());
        project_box(delta, x, config.epsilon);
    }
    assert_box(delta, x, config.epsilon);
    double current = objective_at(delta);
    result.initial_objective = current;
    result.trace.push_back({0, current, Perturbation{delta}.linf()});
    std::vector<double> best = delta;
    double best_value = current;

    if (config.epsilon > 0.0) {
        std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
        double b1t = 1.0, b2t = 1.0;
        for (std::size_t it = 1; it <= config.iterations; ++it) {
            const auto grad = universal_gradient(classifiers, Perturbation{delta}.apply(x), weights, form);
            if (config.optimizer == AttackOptimizer::adam) {
                b1t *= config.beta1;
                b2t *= config.beta2;
                for (std::size_t j = 0; j < x.size(); ++j) {
                    m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad[j];
                    v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad[j] * grad[j];
                    const double mhat = m[j] / (1.0 - b1t);
                    const double vhat = v[j] / (1.0 - b2t);
                    delta[j] -= config.adam_lr * mhat / (std::sqrt(vhat) + config.adam_eps);
                }
            } else {
                for (std::size_t j = 0; j < x.size(); ++j) delta[j] -= config.step_size() * sign(grad[j]);
            }
            project_box(delta, x, config.epsilon);
            assert_box(delta, x, config.epsilon);
            current = objective_at(delta);
            result.trace.push_back({it, current, Perturbation{delta}.linf()});
            if (current < best_value) {
                best_value = current;
                best = delta;
            }
        }
    }
    result.perturbation.delta = std::move(best);
    result.objective = best_value;
    return result;
}

PhenotypeClassifier adversarial_train(const PhenotypeClassifier& model, const TrainingSet& train_data,
                                      const AdversarialTrainConfig& config) {
    config.attack.validate();
    if (config.passes < 1) throw ConfigError("passes", "must be >= 1");
    if (!(config.subset_fraction > 0.0 && config.subset_fraction <= 1.0))
        throw ConfigError("subset_fraction", "must lie in (0, 1]");
    PhenotypeClassifier current = model;

    for (std::size_t pass = 0; pass < config.passes; ++pass) {
        TrainConfig tc = config.train;
        tc.seed = derive_seed(config.train.seed, {pass});
        BatchAugmenter augment;
        if (config.attack.epsilon > 0.0) {
            // The batch order is already shuffled, so its leading share is a
            // random subset of the batch.
            augment = [&, pass](const PhenotypeClassifier& m, std::span<const std::size_t> batch, std::size_t epoch,
                                std::vector<FeatureVector>& inputs, std::vector<std::size_t>& labels,
                                std::vector<std::size_t>& sources) {
                const auto count = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::lround(config.subset_fraction * static_cast<double>(batch.size()))));
                for (std::size_t s = 0; s < std::min(count, batch.size()); ++s) {
                    const std::size_t i = batch[s];
                    AttackConfig a = config.attack;
                    a.optimizer = AttackOptimizer::sign_gradient;
                    a.random_start = true;
                    a.seed = derive_seed(config.attack.seed, {pass, epoch, i});
                    inputs.push_back(pgd_single(m, train_data.inputs[i], train_data.labels[i], a).apply(train_data.inputs[i]));
                    labels.push_back(train_data.labels[i]);
                    sources.push_back(i);
                }
            };
        }
        current = continue_training(current, train_data, tc, augment).model;
    }
    current.metadata["adversarial_epsilon"] = config.attack.epsilon;
    current.metadata["adversarial_passes"] = config.passes;
    return current;
}

DatasetAttack attack_dataset_universal(const PairedDataset& dataset, const ClassifierSet& classifiers,
                                       const ConditionalModel& model, const AttackConfig& config,
                                       UniversalForm form) {
    DatasetAttack out;
    const std::size_t n = dataset.individuals.size();
    out.perturbed.resize(n);
    out.results.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const Individual& ind = dataset.individuals[i];
        AttackConfig c = config;
        c.seed = derive_seed(config.seed, {i});
        out.results[i] = universal_noise(classifiers, ind.features, ind.genotype, model, c, form);
        out.perturbed[i] = out.results[i].perturbation.apply(ind.features);
    });
    return out;
}

DatasetAttack attack_dataset_single(const PairedDataset& dataset, const ClassifierSet& classifiers, Phenotype target,
                                    const AttackConfig& config) {
    DatasetAttack out;
    const std::size_t n = dataset.individuals.size();
    out.perturbed.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const Individual& ind = dataset.individuals[i];
        AttackConfig c = config;
        c.seed = derive_seed(config.seed, {i});
        out.perturbed[i] = pgd_single(classifiers[index_of(target)], ind.features, ind.profile.variant(target), c)
                               .apply(ind.features);
    });
    return out;
}

nlohmann::json trace_to_json(const std::vector<TraceEntry>& trace) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : trace) out.push_back({{"iteration", t.iteration}, {"objective", t.objective}, {"linf", t.linf}});
    return out;
}

}  // namespace reid
