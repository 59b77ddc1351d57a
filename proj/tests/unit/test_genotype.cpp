#include "doctest.h"

#include <algorithm>
#include <random>
#include <string>

#include "reid/error.hpp"
#include "reid/genotype.hpp"
#include "reid/panel.hpp"
#include "reid/rng.hpp"

using namespace reid;

TEST_CASE("default panel lists the pigmentation SNPs and variant sets") {
    const auto panel = SnpPanel::default_panel();
    CHECK(panel.snps(Phenotype::skin) == std::vector<std::string>{"rs26722", "rs1667394", "rs16891982"});
    CHECK(panel.snps(Phenotype::hair) == std::vector<std::string>{"rs12821256", "rs35264875"});
    CHECK(panel.snps(Phenotype::eye) ==
          std::vector<std::string>{"rs916977", "rs1129038", "rs1800401", "rs2238289", "rs2240203", "rs3935591",
                                   "rs4778241", "rs7183877", "rs8028689", "rs12593929", "rs1800407", "rs7495174"});
    CHECK(panel.snps(Phenotype::sex).empty());
    CHECK(panel.variants(Phenotype::sex) == std::vector<std::string>{"F", "M"});
    CHECK(panel.variants(Phenotype::eye) == std::vector<std::string>{"blue", "brown", "intermediate"});
    CHECK(panel.variants(Phenotype::hair) == std::vector<std::string>{"black", "blonde", "brown"});
    CHECK(panel.variants(Phenotype::skin) == std::vector<std::string>{"pale", "intermediate", "dark"});
    CHECK(panel.all_snps().size() == 17);
}

TEST_CASE("panel JSON round trip and validation") {
    const auto panel = SnpPanel::default_panel();
    CHECK(SnpPanel::from_json(panel.to_json()) == panel);
    auto doc = panel.to_json();
    doc["skin"]["snps"].push_back("rs12821256");
    CHECK_THROWS_AS(SnpPanel::from_json(doc), ParseError);
    doc = panel.to_json();
    doc["eye"]["variants"] = {"blue", "blue", "brown"};
    CHECK_THROWS_AS(SnpPanel::from_json(doc), ParseError);
    doc = panel.to_json();
    doc["sex"]["variants"] = {"X", "M"};
    CHECK_THROWS_AS(SnpPanel::from_json(doc), ParseError);
}

TEST_CASE("a panel line maps straight to a call") {
    const auto panel = SnpPanel::default_panel();
    const auto r = parse_raw_genotype("rs1129038\t15\t28356859\tAG\n", panel, "x");
    CHECK(r.call("rs1129038") == GenotypeCall('A', 'G'));
    CHECK(r.call("rs916977").is_missing());
}

TEST_CASE("non-panel lines are skipped") {
    const auto panel = SnpPanel::default_panel();
    const auto r = parse_raw_genotype("# comment\nrs9999999\t1\t1\tAA\n", panel, "x");
    for (const auto& s : panel.all_snps()) CHECK(r.call(s).is_missing());
    CHECK_FALSE(r.has_y_calls);
}

TEST_CASE("allele order does not matter") {
    const auto panel = SnpPanel::default_panel();
    const auto a = parse_raw_genotype("rs1129038\t15\t28356859\tGA\n", panel, "x");
    const auto b = parse_raw_genotype("rs1129038\t15\t28356859\tAG\n", panel, "x");
    CHECK(a == b);
    CHECK(a.call("rs1129038").str() == "AG");
}

TEST_CASE("bad alleles and malformed lines report the line") {
    const auto panel = SnpPanel::default_panel();
    try {
        parse_raw_genotype("# header\nrs1129038\t15\t1\tAG\nrs916977\t15\t1\tAQ\n", panel, "x");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_raw_genotype("rs1129038 15 1 AG\n", panel, "x"), ParseError);
    CHECK_THROWS_AS(parse_raw_genotype("# only comments\n", panel, "x"), ParseError);
}

TEST_CASE("conflicting duplicate SNP lines are inconsistent, repeats are fine") {
    const auto panel = SnpPanel::default_panel();
    CHECK_THROWS_AS(parse_raw_genotype("rs1129038\t15\t1\tAG\nrs1129038\t15\t1\tAA\n", panel, "x"), ConsistencyError);
    CHECK_NOTHROW(parse_raw_genotype("rs1129038\t15\t1\tAG\nrs1129038\t15\t1\tGA\n", panel, "x"));
}

TEST_CASE("Y calls set the sex; no-calls and haploid calls") {
    const auto panel = SnpPanel::default_panel();
    auto r = parse_raw_genotype("rs1129038\t15\t1\tAG\ni4000001\tY\t2655180\tA\n", panel, "x");
    CHECK(r.has_y_calls);
    CHECK(sex_from_genotype(r, panel) == panel.male_index());
    r = parse_raw_genotype("rs1129038\t15\t1\tAG\ni4000001\tY\t2655180\t--\n", panel, "x");
    CHECK_FALSE(r.has_y_calls);
    r = parse_raw_genotype("rs1129038\t15\t1\t--\n", panel, "x");
    CHECK(r.call("rs1129038").is_missing());
}

namespace {

GenotypeRecord random_record(Rng& rng, const SnpPanel& panel, const std::string& id) {
    const std::string bases = "ACGT";
    std::uniform_int_distribution<int> b(0, 3), miss(0, 4);
    GenotypeRecord r;
    r.individual_id = id;
    for (const auto& s : panel.all_snps())
        r.calls[s] = miss(rng) == 0 ? GenotypeCall::missing() : GenotypeCall(bases[b(rng)], bases[b(rng)]);
    r.has_y_calls = miss(rng) < 2;
    return r;
}

}  // namespace

TEST_CASE("serialise then parse is the identity, under CRLF and shuffled lines") {
    const auto panel = SnpPanel::default_panel();
    Rng rng = make_rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto r = random_record(rng, panel, "id" + std::to_string(t));
        const std::string text = serialize_raw_genotype(r, panel);
        CHECK(parse_raw_genotype(text, panel, r.individual_id) == r);

        std::string crlf;
        for (char c : text) crlf += c == '\n' ? std::string("\r\n") : std::string(1, c);
        CHECK(parse_raw_genotype(crlf, panel, r.individual_id) == r);

        std::vector<std::string> lines;
        std::size_t start = 0;
        while (start < text.size()) {
            const auto end = text.find('\n', start);
            lines.push_back(text.substr(start, end - start));
            start = end + 1;
        }
        std::shuffle(lines.begin(), lines.end(), rng);
        std::string shuffled;
        for (const auto& l : lines) shuffled += l + "\n";
        CHECK(parse_raw_genotype(shuffled, panel, r.individual_id) == r);
    }
}

TEST_CASE("genotype collections round trip and reject duplicate ids") {
    const auto panel = SnpPanel::default_panel();
    Rng rng = make_rng(4);
    std::vector<GenotypeRecord> records;
    for (int i = 0; i < 5; ++i) records.push_back(random_record(rng, panel, "g" + std::to_string(i)));
    const auto text = serialize_genotype_collection(records, panel);
    CHECK(parse_genotype_collection(text, panel) == records);
    CHECK_THROWS_AS(parse_genotype_collection(text + text, panel), ConsistencyError);
    CHECK_THROWS_AS(parse_genotype_collection("rs1129038\t15\t1\tAG\n", panel), ParseError);
}

TEST_CASE("phenotype labels") {
    const auto panel = SnpPanel::default_panel();
    const auto p = load_phenotype_labels("id,sex,hair,eye,skin\nu1,F,brown,blue,pale\n", panel);
    REQUIRE(p.size() == 1);
    CHECK(p[0].individual_id == "u1");
    CHECK(p[0].variant(Phenotype::sex) == 0);
    CHECK(p[0].variant(Phenotype::hair) == 2);
    CHECK(p[0].variant(Phenotype::eye) == 0);
    CHECK(p[0].variant(Phenotype::skin) == 0);
    CHECK(load_phenotype_labels("id,sex,hair,eye,skin\nu1,f,BROWN,Blue,pale\r\n", panel) == p);

    try {
        load_phenotype_labels("id,sex,hair,eye,skin\nu2,F,red,blue,pale\n", panel);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("unknown variant red for hair") != std::string::npos);
        CHECK(e.line() == 2);
    }
    CHECK(load_phenotype_labels("id,sex,hair,eye,skin\n", panel).empty());
    CHECK_THROWS_AS(load_phenotype_labels("id,sex,hair,eye,skin\nu1,F,brown,blue,pale\nu1,M,brown,blue,pale\n", panel),
                    ConsistencyError);
    const auto text = write_phenotype_labels(p, panel);
    CHECK(load_phenotype_labels(text, panel) == p);
}
