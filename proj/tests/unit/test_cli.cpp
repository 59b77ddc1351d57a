#include "doctest.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "reid/dataset_io.hpp"

#ifndef REID_CLI_PATH
#define REID_CLI_PATH "reid"
#endif

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("reid_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args, const std::string& log = "last.log") {
    const std::string cmd = std::string(REID_CLI_PATH) + " " + args + " > " + (work() / log).string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() { return reid::read_text_file(work() / "last.log"); }

std::string p(const std::string& rel) { return (work() / rel).string(); }

void write(const std::string& rel, const std::string& text) { reid::write_text_file(work() / rel, text); }

// Column `name` of a CSV as doubles, keyed by the first column.
std::map<std::string, double> column(const std::string& rel, const std::string& name) {
    std::istringstream in(reid::read_text_file(work() / rel));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) header.push_back(c);
    }
    const auto idx = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    std::map<std::string, double> out;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        out[cells[0]] = std::stod(cells.at(idx));
    }
    return out;
}

const std::string kLabels = "id,sex,hair,eye,skin\na,M,black,blue,pale\nb,F,brown,brown,dark\n";

void write_raw_inputs() {
    write("raw/a.txt", "# a\nrs12821256\t12\t100\tCT\nrs1129038\t15\t1\tAG\ni4000001\tY\t2655180\tA\n");
    write("raw/b.txt", "# b\nrs12821256\t12\t100\tCC\nrs1129038\t15\t1\tGG\n");
    write("labels.csv", kLabels);
}

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("sweep --help") == 0);
    CHECK(run("") == 4);
    CHECK(run("frobnicate") == 4);
    CHECK(run("sweep --trials abc --out-dir " + p("x")) == 4);
}

TEST_CASE("ingest: success, reruns, parse and consistency errors") {
    write_raw_inputs();
    REQUIRE(run("ingest --out-dir " + p("ing1") + " --genotypes " + p("raw") + " --phenotypes " + p("labels.csv")) == 0);
    CHECK(fs::exists(work() / "ing1" / "manifest.json"));
    REQUIRE(run("ingest --out-dir " + p("ing2") + " --genotypes " + p("raw") + " --phenotypes " + p("labels.csv")) == 0);
    for (const char* f : {"manifest.json", "genotypes.tsv", "phenotypes.csv"})
        CHECK(reid::read_text_file(work() / "ing1" / f) == reid::read_text_file(work() / "ing2" / f));

    write("bad/a.txt", "# a\nrs12821256\t12\t100\tCT\nrs1129038\t15\t1\tAX\n");
    write("bad/b.txt", "# b\nrs12821256\t12\t100\tCC\n");
    CHECK(run("ingest --out-dir " + p("ing3") + " --genotypes " + p("bad") + " --phenotypes " + p("labels.csv")) == 2);
    CHECK(last_log().find("a.txt") != std::string::npos);
    CHECK(last_log().find("line 3") != std::string::npos);

    write("labels3.csv", kLabels + "c,F,brown,brown,dark\n");
    CHECK(run("ingest --out-dir " + p("ing4") + " --genotypes " + p("raw") + " --phenotypes " + p("labels3.csv")) == 3);
    CHECK(last_log().find("label without genotype") != std::string::npos);
}

TEST_CASE("config files: values, overrides and unknown keys") {
    write_raw_inputs();
    REQUIRE(run("ingest --out-dir " + p("cfg_ing") + " --genotypes " + p("raw") + " --phenotypes " + p("labels.csv")) == 0);
    write("fit.json", "{\"seed\": 3, \"fit\": {\"smoothing\": 2}}");
    REQUIRE(run("fit --config " + p("fit.json") + " --out-dir " + p("fit1") + " --dataset " + p("cfg_ing")) == 0);
    const std::string m1 = reid::read_text_file(work() / "fit1" / "manifest.json");
    CHECK(m1.find("\"seed\": 3") != std::string::npos);
    CHECK(m1.find("\"smoothing\": \"2\"") != std::string::npos);
    REQUIRE(run("fit --config " + p("fit.json") + " --smoothing 0.5 --out-dir " + p("fit2") + " --dataset " + p("cfg_ing")) == 0);
    CHECK(reid::read_text_file(work() / "fit2" / "manifest.json").find("\"smoothing\": \"0.5\"") != std::string::npos);

    write("bad.json", "{\"fit\": {\"smoothnes\": 2}}");
    CHECK(run("fit --config " + p("bad.json") + " --out-dir " + p("fit3") + " --dataset " + p("cfg_ing")) == 4);
    CHECK(last_log().find("smoothnes") != std::string::npos);
    CHECK(run("fit --smoothing -1 --out-dir " + p("fit4") + " --dataset " + p("cfg_ing")) == 4);
    CHECK(last_log().find("smoothing") != std::string::npos);
}

TEST_CASE("end-to-end pipeline on the default world") {
    const std::string g = " --seed 1 ";
    // Subcases re-enter this body, so the world is built once.
    static const bool built = run("synth" + g + "--out-dir " + p("world") + " --mode ideal") == 0 &&
                              run("fit" + g + "--out-dir " + p("world_model") + " --dataset " + p("world/pool")) == 0 &&
                              run("train" + g + "--out-dir " + p("world_clf") + " --dataset " + p("world/train") +
                                  " --test " + p("world")) == 0;
    REQUIRE(built);
    const std::string base = " --dataset " + p("world") + " --model " + p("world_model/model.json") + " --classifiers " +
                             p("world_clf/classifiers.json");

    SUBCASE("random mode sits at k/n") {
        REQUIRE(run("sweep" + g + "--out-dir " + p("s_rand") + base +
                    " --mode random --k 1 --population-sizes 10 --trials 100") == 0);
        const double mean = column("s_rand/sweep.csv", "mean").at("10");
        const double sd = column("s_rand/sweep.csv", "std").at("10");
        const double se = sd / std::sqrt(456.0 * 100.0);
        CHECK(std::abs(mean - 0.1) <= 3 * se);
    }
    SUBCASE("full oracle bounds the predicted mode") {
        REQUIRE(run("sweep" + g + "--out-dir " + p("s_pred") + base + " --population-sizes 20,50,100,200") == 0);
        REQUIRE(run("sweep" + g + "--out-dir " + p("s_orc") + base + " --mode oracle-all --population-sizes 20,50,100,200") == 0);
        const auto pred = column("s_pred/sweep.csv", "mean");
        const auto orc = column("s_orc/sweep.csv", "mean");
        for (const auto& [n, v] : pred) CHECK(orc.at(n) >= v);
        const std::string csv = reid::read_text_file(work() / "s_orc" / "sweep.csv");
        CHECK(csv.rfind("population_size,k,mean,std,", 0) == 0);
        CHECK(csv.find(",oracle-all,") != std::string::npos);
    }
    SUBCASE("universal noise then sweep is at or below random") {
        REQUIRE(run("attack" + g + "--out-dir " + p("att") + base + " --universal --epsilon 0.25") == 0);
        REQUIRE(run("sweep" + g + "--out-dir " + p("s_att") + base + " --features " + p("att/features.csv") +
                    " --population-sizes 20,50,100,200") == 0);
        for (const auto& [n, v] : column("s_att/sweep.csv", "mean")) CHECK(v <= 1.0 / std::stod(n));
    }
    SUBCASE("ROC and report") {
        REQUIRE(run("roc" + g + "--out-dir " + p("roc") + base) == 0);
        const auto j = nlohmann::json::parse(reid::read_text_file(work() / "roc" / "auc.json"));
        CHECK(j["topk_auc"].get<double>() > j["threshold_auc"].get<double>());
        REQUIRE(run("report" + g + "--out-dir " + p("rep") + " --inputs " + p("roc/roc_topk.csv")) == 0);
        CHECK(fs::exists(work() / "rep" / "roc_roc_topk.svg"));
    }
    SUBCASE("consistency errors") {
        CHECK(run("sweep" + g + "--out-dir " + p("s_bad") + base + " --features " + p("world/pool/phenotypes.csv")) == 2);
        CHECK(run("sweep" + g + "--out-dir " + p("s_bad") + " --dataset " + p("world/pool") + " --model " +
                  p("world_model/model.json") + " --mode predicted --classifiers " + p("world_clf/classifiers.json")) == 3);
    }
}
