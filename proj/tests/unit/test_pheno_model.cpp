#include "doctest.h"

#include <cmath>
#include <numeric>

#include "../common/tiny.hpp"
#include "reid/error.hpp"
#include "reid/pheno_model.hpp"

using namespace reid;

namespace {

GenotypeRecord with_calls(const std::string& id, std::initializer_list<std::pair<const char*, const char*>> calls,
                          bool y = false) {
    GenotypeRecord r;
    r.individual_id = id;
    for (const auto& [rs, c] : calls) r.calls[rs] = GenotypeCall::parse(c);
    r.has_y_calls = y;
    return r;
}

PhenotypeProfile profile(const std::string& id, std::size_t sex, std::size_t hair, std::size_t eye, std::size_t skin) {
    PhenotypeProfile p;
    p.individual_id = id;
    p.variants = {sex, hair, eye, skin};
    return p;
}

}  // namespace

TEST_CASE("add-one priors from a hand count") {
    const auto panel = SnpPanel::default_panel();
    std::vector<GenotypeRecord> g;
    std::vector<PhenotypeProfile> l;
    const std::size_t eyes[] = {0, 0, 1, 2};  // blue, blue, brown, intermediate
    for (int i = 0; i < 4; ++i) {
        g.push_back(with_calls("i" + std::to_string(i), {}));
        l.push_back(profile("i" + std::to_string(i), 0, 0, eyes[i], 0));
    }
    const auto m = ConditionalModel::fit(g, l, panel);
    const auto& prior = m.prior(Phenotype::eye);
    CHECK(prior[0] == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
    CHECK(prior[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
    CHECK(prior[2] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("zero smoothing on a single class floors and renormalises") {
    const auto panel = SnpPanel::default_panel();
    std::vector<GenotypeRecord> g{with_calls("a", {{"rs1129038", "AA"}}), with_calls("b", {{"rs1129038", "AA"}})};
    std::vector<PhenotypeProfile> l{profile("a", 0, 0, 0, 0), profile("b", 0, 0, 0, 0)};
    FitOptions opt;
    opt.smoothing = 0.0;
    const auto m = ConditionalModel::fit(g, l, panel, opt);
    const auto* t = m.table("rs1129038", GenotypeCall('A', 'A'));
    REQUIRE(t != nullptr);
    const double eps = 1e-6;
    const double z = 1.0 + 2 * eps;
    CHECK((*t)[0] == doctest::Approx(1.0 / z));
    CHECK((*t)[1] == doctest::Approx(eps / z));
    CHECK((*t)[2] == doctest::Approx(eps / z));
    CHECK((*t)[1] >= opt.probability_floor * (1 - 1e-12));
    CHECK(m.table("rs1129038", GenotypeCall('G', 'G')) == nullptr);
}

TEST_CASE("fitted distributions sum to one and respect the floor") {
    const auto tiny = testing::build_tiny();
    const auto m = ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel);
    for (const auto& s : tiny.panel.all_snps()) {
        for (const auto& [call, dist] : m.snp_table(s)) {
            CHECK_FALSE(call.is_missing());
            CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
            for (double v : dist) CHECK(v >= m.probability_floor());
        }
    }
    for (Phenotype p : kPhenotypes) {
        const auto& d = m.prior(p);
        CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(m.snp_table("rs9999"), std::invalid_argument);
}

TEST_CASE("all SNPs missing gives the prior to the power of the SNP count") {
    const auto tiny = testing::build_tiny();
    const auto m = ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel);
    const auto empty = with_calls("e", {});
    for (Phenotype p : {Phenotype::hair, Phenotype::eye, Phenotype::skin})
        for (std::size_t v = 0; v < tiny.panel.num_variants(p); ++v)
            CHECK(m.variant_given_genome(p, v, empty) ==
                  doctest::Approx(std::pow(m.prior(p)[v], static_cast<double>(tiny.panel.snps(p).size())))
                      .epsilon(1e-12));
}

TEST_CASE("hair with both SNPs called matches the brute-force product") {
    const auto tiny = testing::build_tiny();
    const auto m = ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel);
    for (std::size_t j = 0; j < tiny.people.size(); ++j)
        for (const auto& v : tiny.panel.variants(Phenotype::hair))
            CHECK(m.variant_given_genome("hair", v, tiny.genomes[j]) ==
                  doctest::Approx(testing::oracle_probability(tiny, 1, v, tiny.people[j])).epsilon(1e-12));
}

TEST_CASE("sex follows the Y rule") {
    const auto tiny = testing::build_tiny();
    const auto m = ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel);
    const auto male = with_calls("m", {}, true);
    const auto female = with_calls("f", {}, false);
    CHECK(m.variant_given_genome("sex", "M", male) == doctest::Approx(1.0 - 1e-6).epsilon(1e-15));
    CHECK(m.variant_given_genome("sex", "F", male) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(m.variant_given_genome("sex", "F", female) == doctest::Approx(1.0 - 1e-6).epsilon(1e-15));
    CHECK_THROWS_AS(m.variant_given_genome("sex", "X", male), std::invalid_argument);
    CHECK_THROWS_AS(m.variant_given_genome("height", "tall", male), std::invalid_argument);
}

TEST_CASE("normalised likelihoods sum to one over variants") {
    const auto tiny = testing::build_tiny();
    const auto m = ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel);
    for (const auto& g : tiny.genomes)
        for (Phenotype p : kPhenotypes) {
            double s = 0.0;
            for (std::size_t v = 0; v < tiny.panel.num_variants(p); ++v) s += m.variant_given_genome(p, v, g, true);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("model JSON round trip and validation") {
    const auto tiny = testing::build_tiny();
    const auto m = ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel);
    const auto back = ConditionalModel::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    auto doc = m.to_json();
    doc["probability_floor"] = 2.0;
    CHECK_THROWS_AS(ConditionalModel::from_json(doc), ParseError);
}

TEST_CASE("fit errors") {
    const auto tiny = testing::build_tiny();
    std::vector<GenotypeRecord> fewer(tiny.genomes.begin(), tiny.genomes.end() - 1);
    CHECK_THROWS_AS(ConditionalModel::fit(fewer, tiny.labels, tiny.panel), ConsistencyError);
    CHECK_THROWS_AS(ConditionalModel::fit({}, {}, tiny.panel), ConsistencyError);
    FitOptions bad;
    bad.smoothing = -1;
    CHECK_THROWS_AS(ConditionalModel::fit(tiny.genomes, tiny.labels, tiny.panel, bad), ConfigError);
}
