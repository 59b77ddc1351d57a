#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "reid/panel.hpp"
#include "reid/synth.hpp"

namespace reid {

enum class Architecture { linear, mlp };
std::string_view to_string(Architecture a);
Architecture architecture_from_string(std::string_view name);

/// Softmax classifier over the variants of one phenotype, either linear or
/// with one tanh hidden layer. Weights are row-major, outputs by inputs.
struct PhenotypeClassifier {
    Phenotype phenotype = Phenotype::sex;
    Architecture architecture = Architecture::mlp;
    std::size_t input_dim = 0;
    std::size_t hidden = 0;  ///< 0 for linear
    std::size_t num_variants = 0;
    std::vector<double> w1, b1;  ///< hidden layer (mlp only)
    std::vector<double> w2, b2;  ///< output layer
    nlohmann::json metadata = nlohmann::json::object();

    static PhenotypeClassifier zeros(Phenotype p, Architecture a, std::size_t input_dim, std::size_t num_variants,
                                     std::size_t hidden = 16);

    std::vector<double> log_proba(std::span<const double> x) const;
    std::vector<double> predict_proba(std::span<const double> x) const;
    std::size_t predict(std::span<const double> x) const;

    void check_shapes() const;
    nlohmann::json to_json() const;
    static PhenotypeClassifier from_json(const nlohmann::json& doc);
};

/// Scalar objective of the predicted distribution g:
///   log_prob: sum_v w_v log g_v     (cross-entropy is w = -e_label)
///   prob:     sum_v w_v g_v
struct Objective {
    enum class Kind { log_prob, prob };
    Kind kind = Kind::log_prob;
    std::vector<double> weights;

    static Objective cross_entropy(std::size_t label, std::size_t num_variants);
    static Objective weighted_log_prob(std::vector<double> weights);
    static Objective weighted_prob(std::vector<double> weights);
};

double evaluate(const PhenotypeClassifier& model, std::span<const double> x, const Objective& objective);
/// Exact gradient of the objective with respect to the input.
std::vector<double> input_gradient(const PhenotypeClassifier& model, std::span<const double> x,
                                   const Objective& objective);

struct TrainingSet {
    std::vector<FeatureVector> inputs;
    std::vector<std::size_t> labels;
};

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 150;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double l2_penalty = 3e-3;
    Architecture architecture = Architecture::mlp;
    std::size_t hidden = 16;
    /// Weight samples inversely to class frequency.
    bool balance_classes = false;
};

struct TrainResult {
    PhenotypeClassifier model;
    double final_loss = 0.0;
    /// Full-data loss before training and after every epoch.
    std::vector<double> loss_history;
};

/// Mini-batch gradient descent on mean cross-entropy. Throws
/// ConsistencyError when fewer than two classes are present.
TrainResult train(const TrainingSet& data, Phenotype phenotype, std::size_t num_variants, const TrainConfig& config);
/// Continues from `model` (architecture fields of `config` are ignored).
TrainResult continue_training(const PhenotypeClassifier& model, const TrainingSet& data, const TrainConfig& config);

/// Called before every gradient step with the current model, the data
/// indices of the mini-batch and the epoch. It may append extra examples
/// (inputs, labels, and the index of the source example whose sample weight
/// they take) that join that step only.
using BatchAugmenter =
    std::function<void(const PhenotypeClassifier& current, std::span<const std::size_t> batch, std::size_t epoch,
                       std::vector<FeatureVector>& inputs, std::vector<std::size_t>& labels,
                       std::vector<std::size_t>& sources)>;
TrainResult continue_training(const PhenotypeClassifier& model, const TrainingSet& data, const TrainConfig& config,
                              const BatchAugmenter& augment);

double mean_cross_entropy(const PhenotypeClassifier& model, const TrainingSet& data);
double accuracy(const PhenotypeClassifier& model, const TrainingSet& data);

/// One classifier per phenotype, in kPhenotypes order.
using ClassifierSet = std::array<PhenotypeClassifier, kNumPhenotypes>;

nlohmann::json classifiers_to_json(const ClassifierSet& set);
ClassifierSet classifiers_from_json(const nlohmann::json& doc);

/// Most likely variant per phenotype.
PhenotypeProfile predict_profile(const ClassifierSet& set, const std::string& id, std::span<const double> x);

/// Training set for one phenotype drawn from a dataset's features and profiles.
TrainingSet training_set(const PairedDataset& dataset, Phenotype p);

}  // namespace reid
