#include "doctest.h"

#include <cmath>
#include <functional>
#include <numeric>

#include "reid/classifier.hpp"
#include "reid/error.hpp"
#include "reid/rng.hpp"

using namespace reid;

namespace {

PhenotypeClassifier random_model(Rng& rng, Architecture a, std::size_t dim, std::size_t nv, std::size_t hidden = 5) {
    auto m = PhenotypeClassifier::zeros(Phenotype::eye, a, dim, nv, hidden);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto* v : {&m.w1, &m.b1, &m.w2, &m.b2})
        for (double& w : *v) w = n(rng);
    return m;
}

// Straightforward re-implementation of the forward pass.
std::vector<double> reference_proba(const PhenotypeClassifier& m, const std::vector<double>& x) {
    std::vector<double> in = x;
    if (m.architecture == Architecture::mlp) {
        std::vector<double> h(m.hidden);
        for (std::size_t i = 0; i < m.hidden; ++i) {
            double a = m.b1[i];
            for (std::size_t j = 0; j < m.input_dim; ++j) a += m.w1[i * m.input_dim + j] * x[j];
            h[i] = std::tanh(a);
        }
        in = h;
    }
    std::vector<double> e(m.num_variants);
    double total = 0.0;
    for (std::size_t v = 0; v < m.num_variants; ++v) {
        double z = m.b2[v];
        for (std::size_t j = 0; j < in.size(); ++j) z += m.w2[v * in.size() + j] * in[j];
        e[v] = std::exp(z);
        total += e[v];
    }
    for (double& v : e) v /= total;
    return e;
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x) {
    const double h = 1e-5;
    std::vector<double> g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double keep = x[j];
        x[j] = keep + h;
        const double up = f(x);
        x[j] = keep - h;
        const double down = f(x);
        x[j] = keep;
        g[j] = (up - down) / (2 * h);
    }
    return g;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 1e-12;
    for (std::size_t j = 0; j < a.size(); ++j) {
        diff = std::max(diff, std::abs(a[j] - b[j]));
        scale = std::max({scale, std::abs(a[j]), std::abs(b[j])});
    }
    return diff / scale;
}

TrainingSet blobs(Rng& rng, std::size_t n, double sigma, std::size_t classes = 2, std::size_t dim = 4) {
    TrainingSet t;
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = i % classes;
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < dim; ++j) x[j] = std::clamp((j % classes == y ? 0.8 : 0.2) + noise(rng), 0.0, 1.0);
        t.inputs.push_back(x);
        t.labels.push_back(y);
    }
    return t;
}

}  // namespace

TEST_CASE("zero-weight model predicts uniformly") {
    for (auto a : {Architecture::linear, Architecture::mlp}) {
        const auto m = PhenotypeClassifier::zeros(Phenotype::hair, a, 6, 3);
        for (double p : m.predict_proba(std::vector<double>(6, 0.4))) CHECK(p == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("forward pass matches an independent implementation") {
    Rng rng = make_rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 50; ++t) {
        const auto a = t % 2 ? Architecture::mlp : Architecture::linear;
        const auto m = random_model(rng, a, 7, 3);
        std::vector<double> x(7);
        for (double& v : x) v = u(rng);
        const auto p = m.predict_proba(x);
        const auto r = reference_proba(m, x);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
        for (std::size_t v = 0; v < 3; ++v) CHECK(std::abs(p[v] - r[v]) <= 1e-12);
    }
}

TEST_CASE("input gradients agree with central differences") {
    Rng rng = make_rng(2);
    std::uniform_real_distribution<double> u(0.05, 0.95), w(-15, -0.1);
    for (int t = 0; t < 40; ++t) {
        const auto a = t % 2 ? Architecture::mlp : Architecture::linear;
        const auto m = random_model(rng, a, 6, 3);
        std::vector<double> x(6);
        for (double& v : x) v = u(rng);
        std::vector<Objective> objs{Objective::cross_entropy(static_cast<std::size_t>(t % 3), 3),
                                    Objective::weighted_log_prob({w(rng), w(rng), w(rng)}),
                                    Objective::weighted_prob({w(rng), w(rng), w(rng)})};
        for (const auto& o : objs) {
            const auto fd = finite_difference([&](const std::vector<double>& z) { return evaluate(m, z, o); }, x);
            CHECK(rel_error(input_gradient(m, x, o), fd) < 1e-4);
        }
    }
}

TEST_CASE("constant objective has zero gradient") {
    Rng rng = make_rng(3);
    const auto m = random_model(rng, Architecture::mlp, 5, 3);
    const std::vector<double> x(5, 0.5);
    for (double g : input_gradient(m, x, Objective::weighted_prob({2.0, 2.0, 2.0}))) CHECK(std::abs(g) < 1e-12);
    // sum_v log g_v is not constant, but sum_v g_v is.
    CHECK(evaluate(m, x, Objective::weighted_prob({1, 1, 1})) == doctest::Approx(1.0));
}

TEST_CASE("separable data is learned perfectly") {
    Rng rng = make_rng(4);
    const auto data = blobs(rng, 200, 0.05);
    for (auto a : {Architecture::linear, Architecture::mlp}) {
        TrainConfig c;
        c.architecture = a;
        c.epochs = 200;
        c.seed = 5;
        const auto r = train(data, Phenotype::sex, 2, c);
        CHECK(accuracy(r.model, data) == 1.0);
        CHECK(r.loss_history.size() == 201);
    }
    TrainConfig c;
    c.epochs = 50;
    auto clean = blobs(rng, 90, 0.0, 3, 6);
    const auto r = train(clean, Phenotype::eye, 3, c);
    CHECK(accuracy(r.model, blobs(rng, 60, 0.0, 3, 6)) == 1.0);
}

TEST_CASE("full-batch descent with a small step never increases the loss") {
    Rng rng = make_rng(6);
    const auto data = blobs(rng, 120, 0.3, 3, 6);
    for (auto a : {Architecture::linear, Architecture::mlp}) {
        TrainConfig c;
        c.architecture = a;
        c.learning_rate = 1e-3;
        c.batch_size = data.inputs.size();
        c.l2_penalty = 0.0;
        c.epochs = 100;
        const auto r = train(data, Phenotype::eye, 3, c);
        for (std::size_t e = 1; e < r.loss_history.size(); ++e) CHECK(r.loss_history[e] <= r.loss_history[e - 1]);
    }
}

TEST_CASE("training is reproducible and continues deterministically") {
    Rng rng = make_rng(7);
    const auto data = blobs(rng, 100, 0.2);
    TrainConfig c;
    c.epochs = 5;
    c.seed = 11;
    const auto a = train(data, Phenotype::sex, 2, c);
    const auto b = train(data, Phenotype::sex, 2, c);
    CHECK(a.model.w2 == b.model.w2);
    CHECK(continue_training(a.model, data, c).model.w2 == continue_training(b.model, data, c).model.w2);
    CHECK(continue_training(a.model, data, c, BatchAugmenter{}).model.w2 == continue_training(a.model, data, c).model.w2);
}

TEST_CASE("training and model errors") {
    Rng rng = make_rng(8);
    auto data = blobs(rng, 20, 0.1);
    TrainConfig c;
    c.learning_rate = 0;
    CHECK_THROWS_AS(train(data, Phenotype::sex, 2, c), ConfigError);
    c = {};
    for (auto& y : data.labels) y = 0;
    CHECK_THROWS_AS(train(data, Phenotype::sex, 2, c), ConsistencyError);
    CHECK_THROWS_AS(train({}, Phenotype::sex, 2, c), ConsistencyError);
    const auto m = PhenotypeClassifier::zeros(Phenotype::sex, Architecture::linear, 4, 2);
    CHECK_THROWS_AS(m.predict(std::vector<double>(3, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(architecture_from_string("cnn"), ConfigError);
    auto doc = m.to_json();
    doc["w2"] = nlohmann::json::array();
    CHECK_THROWS_AS(PhenotypeClassifier::from_json(doc), ParseError);
}

TEST_CASE("classifier JSON round trip") {
    Rng rng = make_rng(9);
    ClassifierSet set;
    for (Phenotype p : kPhenotypes) {
        set[index_of(p)] = random_model(rng, Architecture::mlp, 32, p == Phenotype::sex ? 2 : 3);
        set[index_of(p)].phenotype = p;
    }
    const auto back = classifiers_from_json(classifiers_to_json(set));
    for (std::size_t i = 0; i < kNumPhenotypes; ++i) {
        CHECK(back[i].w1 == set[i].w1);
        CHECK(back[i].b2 == set[i].b2);
    }
}
