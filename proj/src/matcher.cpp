#include "reid/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "reid/error.hpp"
#include "reid/parallel.hpp"
#include "reid/rng.hpp"

namespace reid {

double SweepRow::standard_error() const {
    return samples > 0 ? std / std::sqrt(static_cast<double>(samples)) : 0.0;
}

double score_pair(const PhenotypeProfile& z, const GenomeLikelihoods& likelihoods) {
    double s = 0.0;
    for (Phenotype p : kPhenotypes) s += likelihoods[index_of(p)].at(z.variant(p));
    return s;
}

double score_pair(const PhenotypeProfile& z, const GenotypeRecord& y, const ConditionalModel& model,
                  bool normalize_variants) {
    return score_pair(z, model.likelihoods(y, normalize_variants));
}

ScoreMatrix score_matrix(const std::vector<PhenotypeProfile>& probes, const std::vector<GenotypeRecord>& genomes,
                         const ConditionalModel& model, bool normalize_variants) {
    ScoreMatrix m;
    for (const auto& p : probes) m.probe_ids.push_back(p.individual_id);
    for (const auto& g : genomes) m.genome_ids.push_back(g.individual_id);
    m.scores.assign(probes.size() * genomes.size(), 0.0);

    std::vector<GenomeLikelihoods> lik(genomes.size());
    parallel_for(genomes.size(), [&](std::size_t j) { lik[j] = model.likelihoods(genomes[j], normalize_variants); });
    parallel_for(probes.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < genomes.size(); ++j) m.at(i, j) = score_pair(probes[i], lik[j]);
    });
    return m;
}

std::vector<RankedGenome> rank_genomes(const PhenotypeProfile& z, const std::vector<GenotypeRecord>& population,
                                       const ConditionalModel& model) {
    std::vector<RankedGenome> out;
    out.reserve(population.size());
    for (const auto& y : population) out.push_back({y.individual_id, score_pair(z, y, model)});
    std::sort(out.begin(), out.end(), [](const RankedGenome& a, const RankedGenome& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.genome_id < b.genome_id;
    });
    return out;
}

std::vector<std::size_t> resolve_pairing(const ScoreMatrix& scores, const TruePairing& pairing) {
    std::map<std::string_view, std::size_t> genome_index;
    for (std::size_t j = 0; j < scores.cols(); ++j) genome_index.emplace(scores.genome_ids[j], j);
    std::vector<std::size_t> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        auto it = pairing.find(scores.probe_ids[i]);
        if (it == pairing.end()) throw ConsistencyError("probe " + scores.probe_ids[i] + " has no true genome");
        auto jt = genome_index.find(it->second);
        if (jt == genome_index.end())
            throw ConsistencyError("true genome " + it->second + " of probe " + scores.probe_ids[i] +
                                   " is not in the population");
        out[i] = jt->second;
    }
    return out;
}

namespace {

bool beats(const ScoreMatrix& m, std::size_t probe, std::size_t a, std::size_t b) {
    const double sa = m.at(probe, a), sb = m.at(probe, b);
    if (sa != sb) return sa > sb;
    return m.genome_ids[a] < m.genome_ids[b];
}

std::size_t full_rank(const ScoreMatrix& m, std::size_t probe, std::size_t genome) {
    std::size_t rank = 1;
    for (std::size_t j = 0; j < m.cols(); ++j)
        if (j != genome && beats(m, probe, j, genome)) ++rank;
    return rank;
}

void check_eval_config(const EvalConfig& config, std::size_t num_genomes) {
    if (config.ks.empty()) throw ConfigError("k", "at least one value required");
    for (std::size_t k : config.ks)
        if (k < 1) throw ConfigError("k", "must be >= 1");
    if (config.trials < 1) throw ConfigError("trials", "must be >= 1");
    if (config.population_sizes.empty()) throw ConfigError("population_sizes", "at least one value required");
    for (std::size_t n : config.population_sizes) {
        if (n < 2) throw ConfigError("population_sizes", "sizes must be >= 2");
        if (n > num_genomes)
            throw ConfigError("population_sizes",
                              "size " + std::to_string(n) + " exceeds the " + std::to_string(num_genomes) + " genomes");
    }
}

void check_finite(const ScoreMatrix& m) {
    for (double s : m.scores)
        if (!std::isfinite(s)) throw ConsistencyError("score matrix contains a non-finite entry");
}

}  // namespace

std::size_t rank_of(const ScoreMatrix& scores, std::size_t probe, std::size_t genome,
                    const std::vector<std::size_t>& candidates) {
    std::size_t rank = 1;
    for (std::size_t c : candidates)
        if (c != genome && beats(scores, probe, c, genome)) ++rank;
    return rank;
}

double topk_success(const ScoreMatrix& scores, const TruePairing& pairing, std::size_t k) {
    if (k < 1) throw ConfigError("k", "must be >= 1");
    if (scores.rows() == 0) return 0.0;
    const auto truth = resolve_pairing(scores, pairing);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.rows(); ++i)
        if (full_rank(scores, i, truth[i]) <= k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

double topk_success(const std::vector<PhenotypeProfile>& probes, const std::vector<GenotypeRecord>& genomes,
                    const TruePairing& pairing, const ConditionalModel& model, std::size_t k) {
    return topk_success(score_matrix(probes, genomes, model), pairing, k);
}

std::vector<SweepRow> population_sweep(const ScoreMatrix& scores, const TruePairing& pairing,
                                       const EvalConfig& config) {
    const std::size_t num_genomes = scores.cols();
    const std::size_t num_probes = scores.rows();
    check_eval_config(config, num_genomes);
    const auto truth = resolve_pairing(scores, pairing);
    const std::size_t nk = config.ks.size();
    const std::size_t ns = config.population_sizes.size();

    // hits[(s * num_probes + i) * nk + kk], trials_run[s]
    std::vector<std::size_t> hits(ns * num_probes * nk, 0);
    std::vector<std::size_t> trials_run(ns);
    for (std::size_t s = 0; s < ns; ++s)
        trials_run[s] =
            (config.population_sizes[s] == num_genomes && !config.random_scores) ? 1 : config.trials;

    parallel_for(num_probes, [&](std::size_t i) {
        const std::size_t true_genome = truth[i];
        std::vector<std::size_t> others;
        others.reserve(num_genomes);
        for (std::size_t j = 0; j < num_genomes; ++j)
            if (j != true_genome) others.push_back(j);
        std::vector<std::size_t> work;
        std::vector<double> draws;

        for (std::size_t s = 0; s < ns; ++s) {
            const std::size_t n = config.population_sizes[s];
            for (std::size_t t = 0; t < trials_run[s]; ++t) {
                Rng rng = make_rng(config.seed, {n, i, t});
                work = others;
                for (std::size_t d = 0; d + 1 < n; ++d) {
                    std::uniform_int_distribution<std::size_t> pick(d, work.size() - 1);
                    std::swap(work[d], work[pick(rng)]);
                }
                std::size_t rank = 1;
                if (config.random_scores) {
                    std::uniform_real_distribution<double> u(0.0, 1.0);
                    const double own = u(rng);
                    for (std::size_t d = 0; d + 1 < n; ++d)
                        if (u(rng) > own) ++rank;
                } else {
                    for (std::size_t d = 0; d + 1 < n; ++d)
                        if (beats(scores, i, work[d], true_genome)) ++rank;
                }
                for (std::size_t kk = 0; kk < nk; ++kk)
                    if (rank <= config.ks[kk]) ++hits[(s * num_probes + i) * nk + kk];
            }
        }
    });

    std::vector<SweepRow> rows;
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t kk = 0; kk < nk; ++kk) {
            std::size_t total = 0;
            for (std::size_t i = 0; i < num_probes; ++i) total += hits[(s * num_probes + i) * nk + kk];
            SweepRow row;
            row.population_size = config.population_sizes[s];
            row.k = config.ks[kk];
            row.samples = num_probes * trials_run[s];
            if (row.samples > 0) {
                const double c = static_cast<double>(row.samples);
                row.mean = static_cast<double>(total) / c;
                row.std = row.samples > 1 ? std::sqrt(row.mean * (1.0 - row.mean) * c / (c - 1.0)) : 0.0;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<SweepRow> population_sweep(const std::vector<PhenotypeProfile>& probes,
                                       const std::vector<GenotypeRecord>& genomes, const TruePairing& pairing,
                                       const ConditionalModel& model, const EvalConfig& config) {
    if (!config.oracle_phenotypes.empty())
        throw ConfigError("oracle_phenotypes", "oracle substitution needs ground-truth profiles");
    return population_sweep(score_matrix(probes, genomes, model), pairing, config);
}

std::vector<SweepRow> population_sweep(const std::vector<PhenotypeProfile>& predicted,
                                       const std::vector<PhenotypeProfile>& truth,
                                       const std::vector<GenotypeRecord>& genomes, const TruePairing& pairing,
                                       const ConditionalModel& model, const EvalConfig& config) {
    if (predicted.size() != truth.size()) throw ConsistencyError("predicted and true profiles differ in length");
    std::vector<PhenotypeProfile> probes;
    probes.reserve(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].individual_id != truth[i].individual_id)
            throw ConsistencyError("predicted and true profiles are not aligned at " + predicted[i].individual_id);
        probes.push_back(oracle_substitute(predicted[i], truth[i], config.oracle_phenotypes));
    }
    return population_sweep(score_matrix(probes, genomes, model), pairing, config);
}

double trapezoid_auc(const std::vector<RocPoint>& points) {
    double auc = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        auc += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
    return auc;
}

RocCurve roc_topk(const ScoreMatrix& scores, const TruePairing& pairing) {
    const std::size_t n = scores.rows();
    if (n < 2) throw ConsistencyError("ROC needs at least two probes");
    if (scores.cols() != n) throw ConsistencyError("top-k ROC needs a square score matrix");
    check_finite(scores);
    const auto truth = resolve_pairing(scores, pairing);

    std::vector<std::size_t> rank_count(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) ++rank_count[full_rank(scores, i, truth[i])];

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, 0.0});
    const double nn = static_cast<double>(n);
    std::size_t matches = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        matches += rank_count[k];
        const double m = static_cast<double>(matches);
        curve.points.push_back({static_cast<double>(k), (static_cast<double>(k) * nn - m) / (nn * (nn - 1.0)), m / nn});
    }
    curve.auc = trapezoid_auc(curve.points);
    return curve;
}

RocCurve roc_threshold(const ScoreMatrix& scores, const TruePairing& pairing) {
    const std::size_t n = scores.rows();
    if (n < 2) throw ConsistencyError("ROC needs at least two probes");
    check_finite(scores);
    const auto truth = resolve_pairing(scores, pairing);

    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> entries;
    entries.reserve(scores.scores.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < scores.cols(); ++j) entries.push_back({scores.at(i, j), truth[i] == j});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });

    const double positives = static_cast<double>(n);
    const double negatives = static_cast<double>(entries.size()) - positives;
    const double inf = std::numeric_limits<double>::infinity();

    RocCurve curve;
    curve.points.push_back({inf, 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t e = 0; e < entries.size();) {
        const double theta = entries[e].score;
        while (e < entries.size() && entries[e].score == theta) {
            (entries[e].positive ? tp : fp) += 1;
            ++e;
        }
        curve.points.push_back({theta, negatives > 0 ? static_cast<double>(fp) / negatives : 0.0,
                                static_cast<double>(tp) / positives});
    }
    curve.points.push_back({-inf, 1.0, 1.0});
    curve.auc = trapezoid_auc(curve.points);
    return curve;
}

PhenotypeProfile oracle_substitute(const PhenotypeProfile& predicted, const PhenotypeProfile& truth,
                                   const std::set<Phenotype>& phenotypes) {
    PhenotypeProfile out = predicted;
    for (Phenotype p : phenotypes) out.variant(p) = truth.variant(p);
    return out;
}

}  // namespace reid
