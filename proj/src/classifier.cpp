#include "reid/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "reid/error.hpp"
#include "reid/rng.hpp"

namespace reid {

std::string_view to_string(Architecture a) { return a == Architecture::linear ? "linear" : "mlp"; }

Architecture architecture_from_string(std::string_view name) {
    if (name == "linear") return Architecture::linear;
    if (name == "mlp") return Architecture::mlp;
    throw ConfigError("architecture", "expected linear or mlp, got " + std::string(name));
}

PhenotypeClassifier PhenotypeClassifier::zeros(Phenotype p, Architecture a, std::size_t input_dim,
                                               std::size_t num_variants, std::size_t hidden) {
    PhenotypeClassifier m;
    m.phenotype = p;
    m.architecture = a;
    m.input_dim = input_dim;
    m.num_variants = num_variants;
    if (a == Architecture::mlp) {
        m.hidden = hidden;
        m.w1.assign(hidden * input_dim, 0.0);
        m.b1.assign(hidden, 0.0);
        m.w2.assign(num_variants * hidden, 0.0);
    } else {
        m.hidden = 0;
        m.w2.assign(num_variants * input_dim, 0.0);
    }
    m.b2.assign(num_variants, 0.0);
    return m;
}

void PhenotypeClassifier::check_shapes() const {
    const bool mlp = architecture == Architecture::mlp;
    const std::size_t fan = mlp ? hidden : input_dim;
    const bool ok = input_dim > 0 && num_variants >= 2 && (!mlp || hidden > 0) &&
                    w1.size() == (mlp ? hidden * input_dim : 0) && b1.size() == (mlp ? hidden : 0) &&
                    w2.size() == num_variants * fan && b2.size() == num_variants;
    if (!ok) throw ParseError("classifier: parameter shapes do not match the architecture");
}

namespace {

struct Forward {
    std::vector<double> hidden;  // tanh activations (mlp)
    std::vector<double> log_proba;
};

Forward forward(const PhenotypeClassifier& m, std::span<const double> x) {
    if (x.size() != m.input_dim)
        throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", model expects " +
                                    std::to_string(m.input_dim));
    Forward f;
    std::span<const double> last = x;
    if (m.architecture == Architecture::mlp) {
        f.hidden.resize(m.hidden);
        for (std::size_t h = 0; h < m.hidden; ++h) {
            double a = m.b1[h];
            const double* row = &m.w1[h * m.input_dim];
            for (std::size_t j = 0; j < m.input_dim; ++j) a += row[j] * x[j];
            f.hidden[h] = std::tanh(a);
        }
        last = f.hidden;
    }
    f.log_proba.resize(m.num_variants);
    for (std::size_t v = 0; v < m.num_variants; ++v) {
        double z = m.b2[v];
        const double* row = &m.w2[v * last.size()];
        for (std::size_t j = 0; j < last.size(); ++j) z += row[j] * last[j];
        f.log_proba[v] = z;
    }
    const double mx = *std::max_element(f.log_proba.begin(), f.log_proba.end());
    double s = 0.0;
    for (double z : f.log_proba) s += std::exp(z - mx);
    const double lse = mx + std::log(s);
    for (double& z : f.log_proba) z -= lse;
    return f;
}

// Gradient of the objective with respect to the logits.
std::vector<double> logit_gradient(const std::vector<double>& log_proba, const Objective& obj) {
    const std::size_t n = log_proba.size();
    if (obj.weights.size() != n)
        throw std::invalid_argument("objective has " + std::to_string(obj.weights.size()) + " weights for " +
                                    std::to_string(n) + " variants");
    std::vector<double> g(n);
    for (std::size_t v = 0; v < n; ++v) g[v] = std::exp(log_proba[v]);
    std::vector<double> dz(n);
    if (obj.kind == Objective::Kind::log_prob) {
        const double wsum = std::accumulate(obj.weights.begin(), obj.weights.end(), 0.0);
        for (std::size_t c = 0; c < n; ++c) dz[c] = obj.weights[c] - g[c] * wsum;
    } else {
        double expected = 0.0;
        for (std::size_t v = 0; v < n; ++v) expected += g[v] * obj.weights[v];
        for (std::size_t c = 0; c < n; ++c) dz[c] = g[c] * (obj.weights[c] - expected);
    }
    return dz;
}

}  // namespace

std::vector<double> PhenotypeClassifier::log_proba(std::span<const double> x) const { return forward(*this, x).log_proba; }

std::vector<double> PhenotypeClassifier::predict_proba(std::span<const double> x) const {
    auto p = log_proba(x);
    for (double& v : p) v = std::exp(v);
    return p;
}

std::size_t PhenotypeClassifier::predict(std::span<const double> x) const {
    const auto lp = log_proba(x);
    return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

Objective Objective::cross_entropy(std::size_t label, std::size_t num_variants) {
    if (label >= num_variants) throw std::invalid_argument("label " + std::to_string(label) + " is not a variant");
    Objective o;
    o.weights.assign(num_variants, 0.0);
    o.weights[label] = -1.0;
    return o;
}

Objective Objective::weighted_log_prob(std::vector<double> weights) { return {Kind::log_prob, std::move(weights)}; }
Objective Objective::weighted_prob(std::vector<double> weights) { return {Kind::prob, std::move(weights)}; }

double evaluate(const PhenotypeClassifier& model, std::span<const double> x, const Objective& objective) {
    const auto lp = forward(model, x).log_proba;
    if (objective.weights.size() != lp.size()) throw std::invalid_argument("objective does not match the variants");
    double s = 0.0;
    for (std::size_t v = 0; v < lp.size(); ++v)
        s += objective.weights[v] * (objective.kind == Objective::Kind::log_prob ? lp[v] : std::exp(lp[v]));
    return s;
}

std::vector<double> input_gradient(const PhenotypeClassifier& model, std::span<const double> x,
                                   const Objective& objective) {
    const Forward f = forward(model, x);
    const auto dz = logit_gradient(f.log_proba, objective);
    std::vector<double> grad(model.input_dim, 0.0);
    if (model.architecture == Architecture::linear) {
        for (std::size_t v = 0; v < model.num_variants; ++v) {
            const double* row = &model.w2[v * model.input_dim];
            for (std::size_t j = 0; j < model.input_dim; ++j) grad[j] += dz[v] * row[j];
        }
        return grad;
    }
    for (std::size_t h = 0; h < model.hidden; ++h) {
        double dh = 0.0;
        for (std::size_t v = 0; v < model.num_variants; ++v) dh += dz[v] * model.w2[v * model.hidden + h];
        const double da = dh * (1.0 - f.hidden[h] * f.hidden[h]);
        const double* row = &model.w1[h * model.input_dim];
        for (std::size_t j = 0; j < model.input_dim; ++j) grad[j] += da * row[j];
    }
    return grad;
}

namespace {

void check_training_set(const TrainingSet& data, std::size_t input_dim, std::size_t num_variants) {
    if (data.inputs.size() != data.labels.size()) throw ConsistencyError("training inputs and labels differ in length");
    std::set<std::size_t> classes;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        if (data.inputs[i].size() != input_dim) throw ConsistencyError("training inputs differ in dimension");
        if (data.labels[i] >= num_variants) throw ConsistencyError("training label out of range");
        classes.insert(data.labels[i]);
    }
    if (classes.size() < 2) throw ConsistencyError("training data must contain at least two classes");
}

std::vector<double> sample_weights(const TrainingSet& data, std::size_t num_variants, bool balance) {
    std::vector<double> w(data.labels.size(), 1.0);
    if (!balance) return w;
    std::vector<double> counts(num_variants, 0.0);
    for (std::size_t y : data.labels) counts[y] += 1.0;
    const double n = static_cast<double>(data.labels.size());
    std::size_t present = 0;
    for (double c : counts) present += c > 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = n / (static_cast<double>(present) * counts[data.labels[i]]);
    return w;
}

double weighted_loss(const PhenotypeClassifier& m, const TrainingSet& data, const std::vector<double>& w) {
    double s = 0.0, total = 0.0;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        s -= w[i] * forward(m, data.inputs[i]).log_proba[data.labels[i]];
        total += w[i];
    }
    return s / total;
}

void check_train_config(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
    if (c.epochs < 1) throw ConfigError("epochs", "must be >= 1");
    if (c.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (!(c.l2_penalty >= 0.0)) throw ConfigError("l2_penalty", "must be >= 0");
    if (c.architecture == Architecture::mlp && c.hidden < 1) throw ConfigError("hidden", "must be >= 1");
}

TrainResult run_training(PhenotypeClassifier m, const TrainingSet& data, const TrainConfig& config,
                         const BatchAugmenter* augment) {
    check_train_config(config);
    check_training_set(data, m.input_dim, m.num_variants);
    const auto weights = sample_weights(data, m.num_variants, config.balance_classes);
    const bool mlp = m.architecture == Architecture::mlp;
    const std::size_t fan = mlp ? m.hidden : m.input_dim;
    const std::size_t n = data.inputs.size();

    std::vector<double> gw1(m.w1.size()), gb1(m.b1.size()), gw2(m.w2.size()), gb2(m.b2.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<FeatureVector> extra_x;
    std::vector<std::size_t> extra_y, extra_src;

    TrainResult result;
    result.loss_history.push_back(weighted_loss(m, data, weights));
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng = make_rng(config.seed, {0xE90Cu, epoch});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            std::fill(gw1.begin(), gw1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            std::fill(gb2.begin(), gb2.end(), 0.0);
            extra_x.clear();
            extra_y.clear();
            extra_src.clear();
            if (augment)
                (*augment)(m, std::span<const std::size_t>(order).subspan(start, end - start), epoch, extra_x, extra_y,
                           extra_src);
            const std::size_t batch_size = (end - start) + extra_x.size();
            double batch_weight = 0.0;
            for (std::size_t b = 0; b < batch_size; ++b) {
                const bool own = b < end - start;
                const std::size_t i = own ? order[start + b] : extra_src[b - (end - start)];
                const auto& x = own ? data.inputs[i] : extra_x[b - (end - start)];
                const std::size_t label = own ? data.labels[i] : extra_y[b - (end - start)];
                const Forward f = forward(m, x);
                const double wi = weights[i];
                batch_weight += wi;
                // d(-log g_y)/dz = g - e_y
                std::vector<double> dz(m.num_variants);
                for (std::size_t v = 0; v < m.num_variants; ++v)
                    dz[v] = wi * (std::exp(f.log_proba[v]) - (v == label ? 1.0 : 0.0));
                const std::span<const double> last = mlp ? std::span<const double>(f.hidden) : std::span<const double>(x);
                for (std::size_t v = 0; v < m.num_variants; ++v) {
                    gb2[v] += dz[v];
                    for (std::size_t j = 0; j < fan; ++j) gw2[v * fan + j] += dz[v] * last[j];
                }
                if (!mlp) continue;
                for (std::size_t h = 0; h < m.hidden; ++h) {
                    double dh = 0.0;
                    for (std::size_t v = 0; v < m.num_variants; ++v) dh += dz[v] * m.w2[v * fan + h];
                    const double da = dh * (1.0 - f.hidden[h] * f.hidden[h]);
                    gb1[h] += da;
                    for (std::size_t j = 0; j < m.input_dim; ++j) gw1[h * m.input_dim + j] += da * x[j];
                }
            }
            const double lr = config.learning_rate;
            auto step = [&](std::vector<double>& p, const std::vector<double>& g, bool decay) {
                for (std::size_t k = 0; k < p.size(); ++k)
                    p[k] -= lr * (g[k] / batch_weight + (decay ? config.l2_penalty * p[k] : 0.0));
            };
            step(m.w2, gw2, true);
            step(m.b2, gb2, false);
            if (mlp) {
                step(m.w1, gw1, true);
                step(m.b1, gb1, false);
            }
        }
        result.loss_history.push_back(weighted_loss(m, data, weights));
    }
    result.final_loss = result.loss_history.back();
    result.model = std::move(m);
    return result;
}

}  // namespace

TrainResult train(const TrainingSet& data, Phenotype phenotype, std::size_t num_variants, const TrainConfig& config) {
    check_train_config(config);
    if (data.inputs.empty()) throw ConsistencyError("training data is empty");
    const std::size_t input_dim = data.inputs.front().size();
    check_training_set(data, input_dim, num_variants);
    PhenotypeClassifier m = PhenotypeClassifier::zeros(phenotype, config.architecture, input_dim, num_variants,
                                                       config.hidden);
    Rng rng = make_rng(config.seed, {0x1417u});
    auto init = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& v : w) v = u(rng);
    };
    if (config.architecture == Architecture::mlp) {
        init(m.w1, input_dim, config.hidden);
        init(m.w2, config.hidden, num_variants);
    } else {
        init(m.w2, input_dim, num_variants);
    }
    return run_training(std::move(m), data, config, nullptr);
}

TrainResult continue_training(const PhenotypeClassifier& model, const TrainingSet& data, const TrainConfig& config) {
    model.check_shapes();
    return run_training(model, data, config, nullptr);
}

TrainResult continue_training(const PhenotypeClassifier& model, const TrainingSet& data, const TrainConfig& config,
                              const BatchAugmenter& augment) {
    model.check_shapes();
    return run_training(model, data, config, augment ? &augment : nullptr);
}

double mean_cross_entropy(const PhenotypeClassifier& model, const TrainingSet& data) {
    return weighted_loss(model, data, std::vector<double>(data.inputs.size(), 1.0));
}

double accuracy(const PhenotypeClassifier& model, const TrainingSet& data) {
    if (data.inputs.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) hits += model.predict(data.inputs[i]) == data.labels[i];
    return static_cast<double>(hits) / static_cast<double>(data.inputs.size());
}

nlohmann::json PhenotypeClassifier::to_json() const {
    return {{"phenotype", std::string(reid::to_string(phenotype))},
            {"architecture", std::string(reid::to_string(architecture))},
            {"input_dim", input_dim},
            {"hidden", hidden},
            {"num_variants", num_variants},
            {"w1", w1},
            {"b1", b1},
            {"w2", w2},
            {"b2", b2},
            {"metadata", metadata}};
}

PhenotypeClassifier PhenotypeClassifier::from_json(const nlohmann::json& doc) {
    try {
        PhenotypeClassifier m;
        const auto p = phenotype_from_string(doc.at("phenotype").get<std::string>());
        if (!p) throw ParseError("classifier: unknown phenotype");
        m.phenotype = *p;
        m.architecture = architecture_from_string(doc.at("architecture").get<std::string>());
        m.input_dim = doc.at("input_dim").get<std::size_t>();
        m.hidden = doc.at("hidden").get<std::size_t>();
        m.num_variants = doc.at("num_variants").get<std::size_t>();
        m.w1 = doc.at("w1").get<std::vector<double>>();
        m.b1 = doc.at("b1").get<std::vector<double>>();
        m.w2 = doc.at("w2").get<std::vector<double>>();
        m.b2 = doc.at("b2").get<std::vector<double>>();
        m.metadata = doc.value("metadata", nlohmann::json::object());
        m.check_shapes();
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("classifier: ") + ex.what());
    }
}

nlohmann::json classifiers_to_json(const ClassifierSet& set) {
    nlohmann::json doc = nlohmann::json::object();
    for (Phenotype p : kPhenotypes) doc[std::string(to_string(p))] = set[index_of(p)].to_json();
    return doc;
}

ClassifierSet classifiers_from_json(const nlohmann::json& doc) {
    ClassifierSet set;
    for (Phenotype p : kPhenotypes) {
        const std::string name(to_string(p));
        if (!doc.contains(name)) throw ParseError("classifiers: missing " + name);
        set[index_of(p)] = PhenotypeClassifier::from_json(doc.at(name));
        if (set[index_of(p)].phenotype != p) throw ParseError("classifiers: entry " + name + " is for another phenotype");
    }
    const std::size_t dim = set[0].input_dim;
    for (const auto& m : set)
        if (m.input_dim != dim) throw ParseError("classifiers: input dimensions differ");
    return set;
}

PhenotypeProfile predict_profile(const ClassifierSet& set, const std::string& id, std::span<const double> x) {
    PhenotypeProfile z;
    z.individual_id = id;
    for (Phenotype p : kPhenotypes) z.variant(p) = set[index_of(p)].predict(x);
    return z;
}

TrainingSet training_set(const PairedDataset& dataset, Phenotype p) {
    TrainingSet t;
    for (const auto& ind : dataset.individuals) {
        if (ind.features.empty()) throw ConsistencyError("individual " + ind.id + " has no features");
        t.inputs.push_back(ind.features);
        t.labels.push_back(ind.profile.variant(p));
    }
    return t;
}

}  // namespace reid
