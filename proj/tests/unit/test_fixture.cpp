// Behaviour on the seeded default world: 456 ideally paired individuals and
// classifiers trained on a separate labelled set.
#include "doctest.h"

#include "../common/fixture.hpp"
#include "reid/adversary.hpp"

using namespace reid;

namespace {

const testing::Fixture& fixture() {
    static const testing::Fixture f = testing::build_fixture();
    return f;
}

double top1(const testing::Fixture& f, const std::vector<PhenotypeProfile>& probes, std::size_t n) {
    EvalConfig ec;
    ec.population_sizes = {n};
    ec.trials = 100;
    ec.seed = 7;
    return population_sweep(score_matrix(probes, f.data.genotypes(), f.model), f.data.pairing(), ec).front().mean;
}

}  // namespace

TEST_CASE("eye colour is the hard phenotype") {
    const auto& f = fixture();
    const double eye = accuracy(f.classifiers[index_of(Phenotype::eye)], training_set(f.data, Phenotype::eye));
    CHECK(eye >= 0.54);
    CHECK(eye <= 0.65);
    for (Phenotype p : {Phenotype::sex, Phenotype::hair, Phenotype::skin})
        CHECK(accuracy(f.classifiers[index_of(p)], training_set(f.data, p)) > 0.9);
}

TEST_CASE("noise-free features are classified perfectly") {
    const auto& f = fixture();
    FeatureConfig fc;
    fc.sigma = {0, 0, 0, 0};
    const auto train_data = testing::labelled_features(f.train_data.profiles(), f.panel, fc, 1);
    const auto test_data = testing::labelled_features(f.data.profiles(), f.panel, fc, 2);
    TrainConfig tc;
    tc.epochs = 20;
    const auto m = train(training_set(train_data, Phenotype::eye), Phenotype::eye, 3, tc).model;
    CHECK(accuracy(m, training_set(test_data, Phenotype::eye)) == 1.0);
}

TEST_CASE("eye oracle lands strictly between predicted and full oracle") {
    const auto& f = fixture();
    const auto truth = f.data.profiles();
    std::vector<PhenotypeProfile> eye;
    for (std::size_t i = 0; i < truth.size(); ++i) eye.push_back(oracle_substitute(f.predicted[i], truth[i], {Phenotype::eye}));
    for (std::size_t n : {20, 100}) {
        const double p = top1(f, f.predicted, n), e = top1(f, eye, n), o = top1(f, truth, n);
        CHECK(p < e);
        CHECK(e < o);
    }
}

TEST_CASE("ROC: top-k beats chance and the global threshold") {
    const auto& f = fixture();
    const auto sm = score_matrix(f.predicted, f.data.genotypes(), f.model);
    const double topk = roc_topk(sm, f.data.pairing()).auc;
    const double thr = roc_threshold(sm, f.data.pairing()).auc;
    CHECK(topk > 0.5);
    CHECK(thr > 0.5);
    CHECK(topk > thr);
}

TEST_CASE("a tiny sex-targeted perturbation does not help matching") {
    const auto& f = fixture();
    AttackConfig c;
    c.epsilon = 0.01;
    const auto att = attack_dataset_single(f.data, f.classifiers, Phenotype::sex, c);
    const auto probes = testing::predict_all(f.classifiers, f.data, att.perturbed);
    for (std::size_t n : {20, 50}) CHECK(top1(f, probes, n) <= top1(f, f.predicted, n));
}

TEST_CASE("adversarial training trades clean accuracy for robustness") {
    const auto& f = fixture();
    const double eps = 0.25;
    double base_attacked = 0, robust_attacked = 0;
    for (Phenotype p : {Phenotype::sex, Phenotype::hair}) {
        AdversarialTrainConfig ac;
        ac.attack.epsilon = eps;
        ac.attack.seed = 3;
        ac.train.seed = 4;
        const auto train_set = training_set(f.train_data, p);
        const auto robust = adversarial_train(f.classifiers[index_of(p)], train_set, ac);
        const auto test = training_set(f.data, p);
        CHECK(accuracy(robust, test) <= accuracy(f.classifiers[index_of(p)], test));
        AttackConfig c;
        c.epsilon = eps;
        ClassifierSet rs = f.classifiers;
        rs[index_of(p)] = robust;
        TrainingSet a = test, b = test;
        a.inputs = attack_dataset_single(f.data, f.classifiers, p, c).perturbed;
        b.inputs = attack_dataset_single(f.data, rs, p, c).perturbed;
        base_attacked = accuracy(f.classifiers[index_of(p)], a);
        robust_attacked = accuracy(robust, b);
        CHECK(robust_attacked >= base_attacked);
    }
}
