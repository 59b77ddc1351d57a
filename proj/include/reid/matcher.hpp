#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "reid/genotype.hpp"
#include "reid/pheno_model.hpp"

namespace reid {

/// Dense log-likelihood matrix, probes by genomes, row-major.
struct ScoreMatrix {
    std::vector<std::string> probe_ids;
    std::vector<std::string> genome_ids;
    std::vector<double> scores;

    std::size_t rows() const { return probe_ids.size(); }
    std::size_t cols() const { return genome_ids.size(); }
    double at(std::size_t probe, std::size_t genome) const { return scores[probe * cols() + genome]; }
    double& at(std::size_t probe, std::size_t genome) { return scores[probe * cols() + genome]; }
};

/// probe id -> id of its true genome.
using TruePairing = std::map<std::string, std::string>;

struct EvalConfig {
    std::vector<std::size_t> ks{1};
    double theta = 0.0;
    std::vector<std::size_t> population_sizes;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::set<Phenotype> oracle_phenotypes;
    /// Replace every score by an independent uniform draw (random baseline).
    bool random_scores = false;
};

struct RankedGenome {
    std::string genome_id;
    double score = 0.0;
};

struct SweepRow {
    std::size_t population_size = 0;
    std::size_t k = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t samples = 0;

    double standard_error() const;
};

struct RocPoint {
    double threshold = 0.0;  ///< k for the top-k scheme, theta otherwise
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// Sum over phenotypes of log P(z_p | y).
double score_pair(const PhenotypeProfile& z, const GenotypeRecord& y, const ConditionalModel& model,
                  bool normalize_variants = false);
double score_pair(const PhenotypeProfile& z, const GenomeLikelihoods& likelihoods);

ScoreMatrix score_matrix(const std::vector<PhenotypeProfile>& probes, const std::vector<GenotypeRecord>& genomes,
                         const ConditionalModel& model, bool normalize_variants = false);

/// Descending score, ties by ascending genome id.
std::vector<RankedGenome> rank_genomes(const PhenotypeProfile& z, const std::vector<GenotypeRecord>& population,
                                       const ConditionalModel& model);

/// Index of each probe's true genome; throws ConsistencyError when a probe
/// has none.
std::vector<std::size_t> resolve_pairing(const ScoreMatrix& scores, const TruePairing& pairing);

/// 1-based rank of `genome` within row `probe`, restricted to `candidates`.
std::size_t rank_of(const ScoreMatrix& scores, std::size_t probe, std::size_t genome,
                    const std::vector<std::size_t>& candidates);

double topk_success(const ScoreMatrix& scores, const TruePairing& pairing, std::size_t k);
double topk_success(const std::vector<PhenotypeProfile>& probes, const std::vector<GenotypeRecord>& genomes,
                    const TruePairing& pairing, const ConditionalModel& model, std::size_t k);

/// Top-k success against sampled sub-populations: for each size n, probe and
/// trial, n-1 distractors are drawn without replacement and the true genome is
/// added. Bitwise reproducible for a fixed seed at any thread count.
std::vector<SweepRow> population_sweep(const ScoreMatrix& scores, const TruePairing& pairing,
                                       const EvalConfig& config);
std::vector<SweepRow> population_sweep(const std::vector<PhenotypeProfile>& probes,
                                       const std::vector<GenotypeRecord>& genomes, const TruePairing& pairing,
                                       const ConditionalModel& model, const EvalConfig& config);
/// As above, with config.oracle_phenotypes taken from `truth` before scoring.
std::vector<SweepRow> population_sweep(const std::vector<PhenotypeProfile>& predicted,
                                       const std::vector<PhenotypeProfile>& truth,
                                       const std::vector<GenotypeRecord>& genomes, const TruePairing& pairing,
                                       const ConditionalModel& model, const EvalConfig& config);

/// ROC over k = 1..N. FPR = (kN - matches) / (N(N-1)).
RocCurve roc_topk(const ScoreMatrix& scores, const TruePairing& pairing);
/// ROC over a global threshold on the score; match iff score >= theta.
RocCurve roc_threshold(const ScoreMatrix& scores, const TruePairing& pairing);

/// `predicted` with the listed phenotypes taken from `truth`.
PhenotypeProfile oracle_substitute(const PhenotypeProfile& predicted, const PhenotypeProfile& truth,
                                   const std::set<Phenotype>& phenotypes);

double trapezoid_auc(const std::vector<RocPoint>& points);

}  // namespace reid
