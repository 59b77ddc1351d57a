// reid: command-line driver for ingesting genotypes, synthesising paired
// data, training phenotype classifiers, matching, and running the
// perturbation defence.
//
// Exit codes: 0 success, 2 parse error, 3 inconsistent data, 4 bad config.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "reid/adversary.hpp"
#include "reid/classifier.hpp"
#include "reid/dataset_io.hpp"
#include "reid/error.hpp"
#include "reid/genotype.hpp"
#include "reid/manifest.hpp"
#include "reid/matcher.hpp"
#include "reid/parallel.hpp"
#include "reid/pheno_model.hpp"
#include "reid/rng.hpp"
#include "reid/synth.hpp"

using namespace reid;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// JSON config files. Top-level keys are global options, nested objects are
// subcommand sections: {"seed": 3, "sweep": {"trials": 50}}.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        json j = json::object();
        for (const CLI::Option* opt : app->get_options({})) {
            if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
            const std::string name = opt->get_lnames().front();
            if (opt->count() > 0) j[name] = opt->as<std::string>();
            else if (default_also && !opt->get_default_str().empty()) j[name] = opt->get_default_str();
        }
        return j.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& ex) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + ex.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
        std::vector<CLI::ConfigItem> items;
        collect(j, {}, items);
        return items;
    }

private:
    static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

    static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it->is_object()) {
                auto p = parents;
                p.push_back(it.key());
                collect(*it, p, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            if (it->is_array())
                for (const auto& v : *it) item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(*it));
            items.push_back(std::move(item));
        }
    }
};

struct Globals {
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string panel_path;
    unsigned threads = 0;
};

// Options that name files or directories. Their paths stay out of the config
// snapshot (reruns in another directory must give the same manifest); their
// content hashes go into the manifest instead.
const std::set<std::string> kPathOptions = {"genotypes", "phenotypes", "dataset", "model",  "classifiers",
                                            "features",  "pool",       "inputs",  "test", "config"};
const std::set<std::string> kUnrecorded = {"help", "out-dir", "threads", "config"};

std::string option_name(const CLI::Option* opt) {
    return opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
}

json snapshot(const CLI::App* app) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
        const std::string name = option_name(opt);
        if (kUnrecorded.count(name) || kPathOptions.count(name) || name == "panel") continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            j[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else if (opt->get_expected_min() == 0) {
            j[name] = "false";
        } else {
            std::string def = opt->get_default_str();
            if (def.size() >= 2 && def.front() == '[' && def.back() == ']') {
                json list = json::array();
                std::stringstream ss(def.substr(1, def.size() - 2));
                std::string item;
                while (std::getline(ss, item, ',')) list.push_back(item);
                j[name] = list;
            } else {
                j[name] = def;
            }
        }
    }
    return j;
}

std::string hash_path(const fs::path& p) {
    if (fs::is_directory(p)) {
        std::vector<std::string> names;
        for (const auto& e : fs::recursive_directory_iterator(p))
            if (e.is_regular_file() && e.path().filename() != "timing.txt")
                names.push_back(fs::relative(e.path(), p).generic_string());
        std::sort(names.begin(), names.end());
        std::string all;
        for (const auto& n : names) all += n + "\t" + sha256_file(p / n) + "\n";
        return sha256_hex(all);
    }
    return sha256_file(p);
}

struct Run {
    std::string command;
    Globals g;
    SnpPanel panel = SnpPanel::default_panel();
    RunManifest manifest;
    std::string id;
    fs::path out;
    std::string mode = "-";
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Run(const CLI::App& root, const CLI::App* sub, const Globals& globals) : command(sub->get_name()), g(globals) {
        if (g.out_dir.empty()) throw ConfigError("out-dir", "required");
        out = g.out_dir;
        if (!g.panel_path.empty()) {
            try {
                panel = SnpPanel::from_json(json::parse(read_text_file(g.panel_path)));
            } catch (const json::exception& ex) {
                throw reid::ParseError(g.panel_path + ": " + ex.what());
            }
        }
        manifest.command = command;
        manifest.seed = g.seed;
        manifest.panel_hash = sha256_hex(panel.to_json().dump());
        json config = snapshot(&root);
        config.erase("seed");
        config[command] = snapshot(sub);
        manifest.config = config;
        for (const CLI::Option* opt : sub->get_options({})) {
            const std::string name = option_name(opt);
            if (!kPathOptions.count(name) || opt->count() == 0) continue;
            const auto& r = opt->results();
            std::string h;
            for (const auto& part : r) {
                std::stringstream ss(part);
                std::string item;
                while (std::getline(ss, item, ',')) h += hash_path(item) + ";";
            }
            manifest.input_hashes[name] = r.size() == 1 && h.size() == 65 ? h.substr(0, 64) : sha256_hex(h);
        }
        id = manifest.id();
        fs::create_directories(out);
    }

    json manifest_json() const {
        json j = manifest.to_json();
        j["id"] = id;
        return j;
    }

    // CSV with trailing mode and manifest_id columns on every row.
    void write_csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows) const {
        std::string text = header + ",mode,manifest_id\n";
        for (const auto& r : rows) text += r + "," + mode + "," + id + "\n";
        write_text_file(out / name, text);
    }

    void write_json(const std::string& name, const json& j) const { write_text_file(out / name, j.dump(2) + "\n"); }

    void finish(const json& written_manifest = nullptr) const {
        write_json("manifest.json", written_manifest.is_null() ? manifest_json() : written_manifest);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_text_file(out / "timing.txt", "duration_seconds\t" + format_double(secs) + "\n");
        std::cerr << command << ": wrote " << out.string() << " (manifest " << id << ")\n";
    }
};

std::string d(double v) { return format_double(v); }

template <class T>
std::string join(const std::vector<T>& xs, const std::string& sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += sep;
        if constexpr (std::is_same_v<T, std::string>) s += xs[i];
        else if constexpr (std::is_floating_point_v<T>) s += d(xs[i]);
        else s += std::to_string(xs[i]);
    }
    return s;
}

Phenotype parse_phenotype(const std::string& name, const std::string& field) {
    auto p = phenotype_from_string(name);
    if (!p) throw ConfigError(field, "unknown phenotype '" + name + "'");
    return *p;
}

// Rewrites parse errors so the message names the file.
template <class F>
auto with_file(const fs::path& path, F&& f) {
    try {
        return f();
    } catch (const reid::ParseError& ex) {
        throw reid::ParseError(path.string() + ": " + ex.what());
    }
}

PairedDataset load_dataset(const fs::path& dir, const SnpPanel& panel) {
    if (!fs::is_directory(dir)) throw reid::ParseError("dataset directory " + dir.string() + " does not exist");
    return with_file(dir, [&] { return read_dataset(dir, panel).dataset; });
}

ConditionalModel load_model(const fs::path& path) {
    return with_file(path, [&] {
        try {
            return ConditionalModel::from_json(json::parse(read_text_file(path)));
        } catch (const json::exception& ex) {
            throw reid::ParseError(ex.what());
        }
    });
}

ClassifierSet load_classifiers(const fs::path& path) {
    return with_file(path, [&] {
        try {
            return classifiers_from_json(json::parse(read_text_file(path)));
        } catch (const json::exception& ex) {
            throw reid::ParseError(ex.what());
        }
    });
}

void override_features(PairedDataset& data, const std::string& path) {
    if (path.empty()) return;
    with_file(path, [&] {
        apply_features(data, read_features_csv(read_text_file(path)));
        return 0;
    });
}

json dataset_manifest(const Run& run, const PairedDataset& data, const FeatureConfig* fc) {
    json j = run.manifest_json();
    j["provenance"] = std::string(to_string(data.provenance));
    j["seed"] = data.seed;
    j["individuals"] = data.individuals.size();
    if (fc) {
        j["dims"] = fc->dims;
        j["sigmas"] = fc->sigma;
        j["center_low"] = fc->center_low;
        j["center_high"] = fc->center_high;
    }
    return j;
}

// Probe profiles for a matching mode: predicted, oracle-all, oracle-<a>+<b>
// or random (predicted profiles with uniform random scores).
struct ProbeMode {
    bool random = false;
    std::set<Phenotype> oracle;
};

ProbeMode parse_mode(const std::string& mode) {
    ProbeMode m;
    if (mode == "predicted") return m;
    if (mode == "random") {
        m.random = true;
        return m;
    }
    if (mode == "oracle-all") {
        m.oracle.insert(kPhenotypes.begin(), kPhenotypes.end());
        return m;
    }
    if (mode.starts_with("oracle-")) {
        std::stringstream ss(mode.substr(7));
        std::string item;
        while (std::getline(ss, item, '+')) m.oracle.insert(parse_phenotype(item, "mode"));
        if (!m.oracle.empty()) return m;
    }
    throw ConfigError("mode", "expected predicted, random, oracle-all or oracle-<phenotype>[+<phenotype>...], got '" +
                                  mode + "'");
}

std::vector<PhenotypeProfile> probes_for(const ProbeMode& mode, const PairedDataset& data,
                                         const std::string& classifiers_path, bool needs_scores) {
    const auto truth = data.profiles();
    if (mode.oracle.size() == kNumPhenotypes) return truth;
    if (mode.random && !needs_scores && classifiers_path.empty()) return truth;
    if (classifiers_path.empty()) throw ConfigError("classifiers", "required for predicted-phenotype modes");
    const ClassifierSet cs = load_classifiers(classifiers_path);
    std::vector<PhenotypeProfile> out(data.individuals.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& ind = data.individuals[i];
        if (ind.features.empty()) throw ConsistencyError("dataset has no features for " + ind.id);
        if (ind.features.size() != cs.front().input_dim)
            throw ConsistencyError("features of " + ind.id + " have dimension " + std::to_string(ind.features.size()) +
                                   ", classifiers expect " + std::to_string(cs.front().input_dim));
        out[i] = oracle_substitute(predict_profile(cs, ind.id, ind.features), truth[i], mode.oracle);
    }
    return out;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string genotypes, phenotypes;
};

std::vector<GenotypeRecord> read_genotype_input(const fs::path& path, const SnpPanel& panel) {
    std::vector<GenotypeRecord> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            out.push_back(with_file(f, [&] { return parse_raw_genotype(read_text_file(f), panel, f.stem().string()); }));
        return out;
    }
    const std::string text = read_text_file(path);
    if (text.find("# individual:") != std::string::npos)
        return with_file(path, [&] { return parse_genotype_collection(text, panel); });
    out.push_back(with_file(path, [&] { return parse_raw_genotype(text, panel, path.stem().string()); }));
    return out;
}

void cmd_ingest(Run& run, const IngestArgs& a) {
    if (a.genotypes.empty()) throw ConfigError("genotypes", "required");
    if (a.phenotypes.empty()) throw ConfigError("phenotypes", "required");
    const auto genotypes = read_genotype_input(a.genotypes, run.panel);
    const auto labels =
        with_file(a.phenotypes, [&] { return load_phenotype_labels(read_text_file(a.phenotypes), run.panel); });
    if (labels.empty()) throw ConsistencyError("no labelled individuals");
    std::map<std::string, const GenotypeRecord*> by_id;
    for (const auto& g : genotypes)
        if (!by_id.emplace(g.individual_id, &g).second) throw ConsistencyError("duplicate genotype for " + g.individual_id);
    PairedDataset data;
    for (const auto& p : labels) {
        auto it = by_id.find(p.individual_id);
        if (it == by_id.end()) throw ConsistencyError("label without genotype: " + p.individual_id);
        Individual ind;
        ind.id = p.individual_id;
        ind.profile = p;
        ind.genotype = *it->second;
        data.individuals.push_back(std::move(ind));
    }
    if (genotypes.size() > labels.size())
        std::cerr << "ingest: " << genotypes.size() - labels.size() << " genotype(s) without labels were skipped\n";
    json m = dataset_manifest(run, data, nullptr);
    m["unlabelled_genotypes_skipped"] = genotypes.size() - labels.size();
    write_dataset(run.out, data, run.panel, m);
    run.finish(m);
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string dataset;
    double smoothing = 1.0;
    double floor = 1e-6;
};

void cmd_fit(Run& run, const FitArgs& a) {
    if (a.dataset.empty()) throw ConfigError("dataset", "required");
    const auto data = load_dataset(a.dataset, run.panel);
    FitOptions opt;
    opt.smoothing = a.smoothing;
    opt.probability_floor = a.floor;
    if (!(opt.smoothing >= 0.0)) throw ConfigError("smoothing", "must be >= 0");
    if (!(opt.probability_floor > 0.0 && opt.probability_floor < 1.0)) throw ConfigError("floor", "must lie in (0, 1)");
    const auto model = ConditionalModel::fit(data.genotypes(), data.profiles(), run.panel, opt);
    run.write_json("model.json", model.to_json());
    std::vector<std::string> rows;
    for (Phenotype p : kPhenotypes)
        for (std::size_t v = 0; v < run.panel.num_variants(p); ++v)
            rows.push_back(std::string(to_string(p)) + "," + run.panel.variants(p)[v] + "," + d(model.prior(p)[v]));
    run.write_csv("priors.csv", "phenotype,variant,prior", rows);
    run.finish();
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string mode = "ideal";
    std::size_t count = 456;
    std::size_t pool_size = 1200;
    std::size_t train_count = 20000;
    std::string pool;
    std::vector<double> sigma;
    double center_low = 0.3, center_high = 0.7;
};

void cmd_synth(Run& run, const SynthArgs& a) {
    if (a.mode != "ideal" && a.mode != "realistic") throw ConfigError("mode", "expected ideal or realistic");
    if (a.count == 0) throw ConfigError("count", "must be >= 1");
    run.mode = a.mode;
    FeatureConfig fc;
    if (!a.sigma.empty()) {
        if (a.sigma.size() != kNumPhenotypes) throw ConfigError("sigma", "expects four values (sex,hair,eye,skin)");
        for (std::size_t i = 0; i < kNumPhenotypes; ++i) {
            if (!(a.sigma[i] >= 0.0)) throw ConfigError("sigma", "must be >= 0");
            fc.sigma[i] = a.sigma[i];
        }
    }
    fc.center_low = a.center_low;
    fc.center_high = a.center_high;

    GenotypePool pool;
    if (!a.pool.empty()) {
        const auto ingested = load_dataset(a.pool, run.panel);
        pool = pool_from(ingested.genotypes(), ingested.profiles());
    } else {
        if (a.pool_size < 2) throw ConfigError("pool-size", "must be >= 2");
        pool = generate_pool(default_population_model(run.panel, derive_seed(run.g.seed, {1})), run.panel, a.pool_size,
                             derive_seed(run.g.seed, {2}));
    }
    std::vector<GenotypeRecord> pool_genotypes;
    std::vector<PhenotypeProfile> pool_labels;
    for (const auto& m : pool) {
        pool_genotypes.push_back(m.genotype);
        pool_labels.push_back(m.profile);
    }
    const auto model = ConditionalModel::fit(pool_genotypes, pool_labels, run.panel);

    const auto profiles = sample_profiles(pool, a.count, derive_seed(run.g.seed, {3}));
    PairedDataset data = a.mode == "ideal" ? pair_ideal(profiles, pool, model)
                                           : pair_realistic(profiles, pool, run.panel, derive_seed(run.g.seed, {4}));
    data.seed = run.g.seed;
    const auto x = generate_features(data.profiles(), run.panel, fc, derive_seed(run.g.seed, {5}));
    for (std::size_t i = 0; i < x.size(); ++i) data.individuals[i].features = x[i];
    const json m = dataset_manifest(run, data, &fc);
    write_dataset(run.out, data, run.panel, m);

    if (a.pool.empty()) {
        PairedDataset pool_data;
        for (const auto& m : pool) pool_data.individuals.push_back({m.genotype.individual_id, {}, m.profile, m.genotype, {}});
        write_dataset(run.out / "pool", pool_data, run.panel, dataset_manifest(run, pool_data, nullptr));
    }
    if (a.train_count > 0) {
        // Labelled features for classifier training; these individuals carry
        // no genotype calls.
        const auto train_profiles = sample_profiles(pool, a.train_count, derive_seed(run.g.seed, {6}), "t");
        const auto tx = generate_features(train_profiles, run.panel, fc, derive_seed(run.g.seed, {7}));
        PairedDataset train_data;
        train_data.seed = run.g.seed;
        for (std::size_t i = 0; i < train_profiles.size(); ++i) {
            Individual ind;
            ind.id = train_profiles[i].individual_id;
            ind.profile = train_profiles[i];
            ind.genotype.individual_id = ind.id;
            ind.features = tx[i];
            train_data.individuals.push_back(std::move(ind));
        }
        write_dataset(run.out / "train", train_data, run.panel, dataset_manifest(run, train_data, &fc));
    }
    run.finish(m);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string dataset, test;
    std::string arch = "mlp";
    std::size_t epochs = 150, batch_size = 32, hidden = 16;
    double lr = 0.1, l2 = 3e-3;
    bool balance = false;
};

void cmd_train(Run& run, const TrainArgs& a) {
    if (a.dataset.empty()) throw ConfigError("dataset", "required");
    TrainConfig tc;
    tc.architecture = architecture_from_string(a.arch);
    tc.epochs = a.epochs;
    tc.batch_size = a.batch_size;
    tc.hidden = a.hidden;
    tc.learning_rate = a.lr;
    tc.l2_penalty = a.l2;
    tc.balance_classes = a.balance;
    run.mode = a.arch;
    const auto data = load_dataset(a.dataset, run.panel);
    std::optional<PairedDataset> test;
    if (!a.test.empty()) test = load_dataset(a.test, run.panel);

    ClassifierSet cs;
    std::array<TrainResult, kNumPhenotypes> results;
    parallel_for(kNumPhenotypes, [&](std::size_t i) {
        const Phenotype p = kPhenotypes[i];
        TrainConfig c = tc;
        c.seed = derive_seed(run.g.seed, {i});
        results[i] = train(training_set(data, p), p, run.panel.num_variants(p), c);
        cs[i] = results[i].model;
    });
    run.write_json("classifiers.json", classifiers_to_json(cs));
    std::vector<std::string> loss_rows, acc_rows;
    for (Phenotype p : kPhenotypes) {
        const auto& r = results[index_of(p)];
        for (std::size_t e = 0; e < r.loss_history.size(); ++e)
            loss_rows.push_back(std::string(to_string(p)) + "," + std::to_string(e) + "," + d(r.loss_history[e]));
        acc_rows.push_back(std::string(to_string(p)) + ",train," + d(accuracy(cs[index_of(p)], training_set(data, p))));
        if (test)
            acc_rows.push_back(std::string(to_string(p)) + ",test," + d(accuracy(cs[index_of(p)], training_set(*test, p))));
    }
    run.write_csv("training.csv", "phenotype,epoch,loss", loss_rows);
    run.write_csv("accuracy.csv", "phenotype,split,accuracy", acc_rows);
    run.finish();
}

// ---------------------------------------------------------------- match / sweep / roc

struct EvalArgs {
    std::string dataset, model, classifiers, features;
    std::string mode = "predicted";
    std::vector<std::size_t> ks{1};
    std::vector<std::size_t> sizes{10, 20, 50, 100, 200};
    std::size_t trials = 100;
    bool normalize = false;
};

struct EvalInputs {
    PairedDataset data;
    ConditionalModel model;
    ProbeMode mode;
    std::vector<PhenotypeProfile> probes;
    ScoreMatrix scores;
};

EvalInputs eval_inputs(Run& run, const EvalArgs& a, bool allow_random) {
    if (a.dataset.empty()) throw ConfigError("dataset", "required");
    if (a.model.empty()) throw ConfigError("model", "required");
    ProbeMode mode = parse_mode(a.mode);
    if (mode.random && !allow_random) throw ConfigError("mode", "random is only available for sweep");
    run.mode = a.mode;
    PairedDataset data = load_dataset(a.dataset, run.panel);
    override_features(data, a.features);
    ConditionalModel model = load_model(a.model);
    if (!(model.panel() == run.panel)) throw ConsistencyError("model was fitted on a different SNP panel");
    auto probes = probes_for(mode, data, a.classifiers, !mode.random);
    auto scores = score_matrix(probes, data.genotypes(), model, a.normalize);
    return {std::move(data), std::move(model), mode, std::move(probes), std::move(scores)};
}

void cmd_match(Run& run, const EvalArgs& a) {
    const auto in = eval_inputs(run, a, false);
    const auto pairing = in.data.pairing();
    const auto truth = resolve_pairing(in.scores, pairing);
    std::vector<std::size_t> all(in.scores.cols());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::string> rows;
    std::string tsv = "probe_id";
    for (const auto& g : in.scores.genome_ids) tsv += "\t" + g;
    tsv += "\n";
    for (std::size_t i = 0; i < in.scores.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < in.scores.cols(); ++j) {
            const double s = in.scores.at(i, j), b = in.scores.at(i, best);
            if (s > b || (s == b && in.scores.genome_ids[j] < in.scores.genome_ids[best])) best = j;
        }
        rows.push_back(in.scores.probe_ids[i] + "," + in.scores.genome_ids[truth[i]] + "," +
                       std::to_string(rank_of(in.scores, i, truth[i], all)) + "," + d(in.scores.at(i, truth[i])) + "," +
                       in.scores.genome_ids[best] + "," + d(in.scores.at(i, best)));
        tsv += in.scores.probe_ids[i];
        for (std::size_t j = 0; j < in.scores.cols(); ++j) tsv += "\t" + d(in.scores.at(i, j));
        tsv += "\n";
    }
    run.write_csv("match.csv", "probe_id,true_genome,rank,true_score,best_genome,best_score", rows);
    std::vector<std::string> topk;
    for (std::size_t k : a.ks) {
        if (k == 0) throw ConfigError("k", "must be >= 1");
        topk.push_back(std::to_string(k) + "," + d(topk_success(in.scores, pairing, k)));
    }
    run.write_csv("topk.csv", "k,success", topk);
    write_text_file(run.out / "scores.tsv", tsv);
    run.finish();
}

void cmd_sweep(Run& run, const EvalArgs& a) {
    const auto in = eval_inputs(run, a, true);
    EvalConfig ec;
    ec.ks = a.ks;
    ec.population_sizes = a.sizes;
    ec.trials = a.trials;
    ec.seed = run.g.seed;
    ec.random_scores = in.mode.random;
    for (std::size_t k : ec.ks)
        if (k == 0) throw ConfigError("k", "must be >= 1");
    for (std::size_t n : ec.population_sizes)
        if (n == 0 || n > in.scores.cols())
            throw ConfigError("population-sizes", "every size must lie in [1, " + std::to_string(in.scores.cols()) + "]");
    if (ec.trials == 0) throw ConfigError("trials", "must be >= 1");
    std::vector<std::string> rows;
    for (const auto& r : population_sweep(in.scores, in.data.pairing(), ec))
        rows.push_back(std::to_string(r.population_size) + "," + std::to_string(r.k) + "," + d(r.mean) + "," + d(r.std) +
                       "," + std::to_string(r.samples));
    run.write_csv("sweep.csv", "population_size,k,mean,std,samples", rows);
    run.finish();
}

void cmd_roc(Run& run, const EvalArgs& a) {
    const auto in = eval_inputs(run, a, false);
    const auto pairing = in.data.pairing();
    const auto topk = roc_topk(in.scores, pairing);
    const auto thr = roc_threshold(in.scores, pairing);
    auto rows = [](const RocCurve& c) {
        std::vector<std::string> out;
        for (const auto& p : c.points) out.push_back(d(p.threshold) + "," + d(p.fpr) + "," + d(p.tpr));
        return out;
    };
    run.write_csv("roc_topk.csv", "threshold,fpr,tpr", rows(topk));
    run.write_csv("roc_threshold.csv", "threshold,fpr,tpr", rows(thr));
    run.write_json("auc.json", {{"topk_auc", topk.auc}, {"threshold_auc", thr.auc}, {"mode", a.mode}, {"manifest_id", run.id}});
    run.finish();
}

// ---------------------------------------------------------------- attack

struct AttackArgs {
    std::string dataset, model, classifiers;
    bool universal = false;
    std::string phenotype;
    double epsilon = 0.25;
    std::size_t iterations = 0;
    double alpha = 0.0, lr = 0.01;
    bool random_start = false;
    std::string form = "log";
    std::string optimizer = "adam";
};

void cmd_attack(Run& run, const AttackArgs& a) {
    if (a.dataset.empty()) throw ConfigError("dataset", "required");
    if (a.classifiers.empty()) throw ConfigError("classifiers", "required");
    if (a.universal == !a.phenotype.empty()) throw ConfigError("universal", "give exactly one of --universal and --phenotype");
    const auto data = load_dataset(a.dataset, run.panel);
    const auto cs = load_classifiers(a.classifiers);
    for (const auto& ind : data.individuals)
        if (ind.features.size() != cs.front().input_dim) throw ConsistencyError("features of " + ind.id + " do not fit the classifiers");

    std::vector<FeatureRow> perturbed;
    std::vector<std::string> rows;
    if (a.universal) {
        if (a.model.empty()) throw ConfigError("model", "required for the universal attack");
        const auto model = load_model(a.model);
        AttackConfig c = universal_defaults(a.epsilon);
        if (a.iterations) c.iterations = a.iterations;
        c.adam_lr = a.lr;
        c.alpha = a.alpha;
        c.seed = run.g.seed;
        if (a.optimizer == "adam") c.optimizer = AttackOptimizer::adam;
        else if (a.optimizer == "sign") c.optimizer = AttackOptimizer::sign_gradient;
        else throw ConfigError("optimizer", "expected adam or sign");
        UniversalForm form;
        if (a.form == "log") form = UniversalForm::log_prob;
        else if (a.form == "prob") form = UniversalForm::prob;
        else throw ConfigError("form", "expected log or prob");
        run.mode = "universal";
        const auto att = attack_dataset_universal(data, cs, model, c, form);
        json traces = json::object();
        for (std::size_t i = 0; i < data.individuals.size(); ++i) {
            const auto& r = att.results[i];
            perturbed.push_back({data.individuals[i].id, att.perturbed[i]});
            rows.push_back(data.individuals[i].id + "," + d(r.perturbation.linf()) + "," + d(r.initial_objective) + "," +
                           d(r.objective));
            traces[data.individuals[i].id] = trace_to_json(r.trace);
        }
        run.write_csv("attack.csv", "id,linf,initial_objective,objective", rows);
        run.write_json("traces.json", {{"manifest_id", run.id}, {"traces", traces}});
    } else {
        const Phenotype p = parse_phenotype(a.phenotype, "phenotype");
        AttackConfig c;
        c.epsilon = a.epsilon;
        if (a.iterations) c.iterations = a.iterations;
        c.alpha = a.alpha;
        c.random_start = a.random_start;
        c.seed = run.g.seed;
        run.mode = "pgd-" + std::string(to_string(p));
        const auto att = attack_dataset_single(data, cs, p, c);
        const auto& m = cs[index_of(p)];
        for (std::size_t i = 0; i < data.individuals.size(); ++i) {
            const auto& ind = data.individuals[i];
            double linf = 0.0;
            for (std::size_t j = 0; j < ind.features.size(); ++j)
                linf = std::max(linf, std::abs(att.perturbed[i][j] - ind.features[j]));
            perturbed.push_back({ind.id, att.perturbed[i]});
            rows.push_back(ind.id + "," + d(linf) + "," + run.panel.variants(p)[ind.profile.variant(p)] + "," +
                           run.panel.variants(p)[m.predict(ind.features)] + "," +
                           run.panel.variants(p)[m.predict(att.perturbed[i])]);
        }
        run.write_csv("attack.csv", "id,linf,true_variant,clean_prediction,attacked_prediction", rows);
    }
    write_text_file(run.out / "features.csv", write_features_csv(perturbed));
    run.finish();
}

// ---------------------------------------------------------------- advtrain

struct AdvArgs {
    std::string dataset, classifiers;
    double epsilon = 0.25;
    std::size_t passes = 5, epochs = 1;
    double fraction = 0.5, lr = 0.1;
};

void cmd_advtrain(Run& run, const AdvArgs& a) {
    if (a.dataset.empty()) throw ConfigError("dataset", "required");
    if (a.classifiers.empty()) throw ConfigError("classifiers", "required");
    const auto data = load_dataset(a.dataset, run.panel);
    const auto base = load_classifiers(a.classifiers);
    ClassifierSet robust;
    parallel_for(kNumPhenotypes, [&](std::size_t i) {
        AdversarialTrainConfig c;
        c.attack.epsilon = a.epsilon;
        c.attack.seed = derive_seed(run.g.seed, {10 + i});
        c.train.seed = derive_seed(run.g.seed, {20 + i});
        c.train.epochs = a.epochs;
        c.train.learning_rate = a.lr;
        c.passes = a.passes;
        c.subset_fraction = a.fraction;
        robust[i] = adversarial_train(base[i], training_set(data, kPhenotypes[i]), c);
    });
    run.mode = "adversarial";
    run.write_json("classifiers.json", classifiers_to_json(robust));
    AttackConfig ac;
    ac.epsilon = a.epsilon;
    ac.seed = run.g.seed;
    std::vector<std::string> rows;
    for (Phenotype p : kPhenotypes) {
        const auto ts = training_set(data, p);
        for (const ClassifierSet* set : {&base, static_cast<const ClassifierSet*>(&robust)}) {
            TrainingSet attacked = ts;
            attacked.inputs = attack_dataset_single(data, *set, p, ac).perturbed;
            rows.push_back(std::string(to_string(p)) + "," + (set == &base ? "base" : "robust") + "," +
                           d(accuracy((*set)[index_of(p)], ts)) + "," + d(accuracy((*set)[index_of(p)], attacked)));
        }
    }
    run.write_csv("accuracy.csv", "phenotype,model,clean_accuracy,attacked_accuracy", rows);
    run.finish();
}

// ---------------------------------------------------------------- report

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw reid::ParseError("missing column " + name);
        return static_cast<std::size_t>(it - header.begin());
    }
};

Csv read_csv(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    Csv csv;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (csv.header.empty()) {
            csv.header = split(line);
            continue;
        }
        csv.rows.push_back(split(line));
        if (csv.rows.back().size() != csv.header.size()) throw reid::ParseError("wrong number of fields", n);
    }
    if (csv.header.empty()) throw reid::ParseError("empty file");
    return csv;
}

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series, bool unit_x) {
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 60;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (!unit_x) {
        xmin = 1e300;
        xmax = -1e300;
        for (const auto& s : series)
            for (const auto& [x, y] : s.points) {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
            }
        if (!(xmax > xmin)) xmax = xmin + 1;
    }
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0, fy = ymin + (ymax - ymin) * t / 4.0;
        o << "<text x=\"" << px(fx) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">" << d(fx)
          << "</text>\n"
          << "<text x=\"" << L - 8 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << d(fy)
          << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel
      << "</text>\n"
      << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* c = colours[s % 7];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[s].points) o << px(x) << "," << py(y) << " ";
        o << "\"/>\n<text x=\"" << W - R + 10 << "\" y=\"" << T + 18 * (s + 1) << "\" font-size=\"12\" fill=\"" << c
          << "\">" << series[s].label << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

struct ReportArgs {
    std::vector<std::string> inputs;
};

void cmd_report(Run& run, const ReportArgs& a) {
    if (a.inputs.empty()) throw ConfigError("inputs", "give at least one CSV");
    run.mode = "report";
    std::vector<std::string> rows;
    for (const auto& input : a.inputs) {
        const fs::path path = input;
        const Csv csv = with_file(path, [&] { return read_csv(path); });
        const std::string name = path.parent_path().filename().string() + "_" + path.stem().string();
        const bool has_mode = std::find(csv.header.begin(), csv.header.end(), "mode") != csv.header.end();
        const std::string mode = has_mode && !csv.rows.empty() ? csv.rows.front()[csv.column("mode")] : "";
        std::map<std::string, Series> series;
        std::string kind;
        if (std::find(csv.header.begin(), csv.header.end(), "population_size") != csv.header.end()) {
            kind = "sweep";
            const auto cn = csv.column("population_size"), ck = csv.column("k"), cm = csv.column("mean");
            for (const auto& r : csv.rows) {
                auto& s = series["k=" + r[ck]];
                s.label = "k=" + r[ck];
                s.points.emplace_back(std::stod(r[cn]), std::stod(r[cm]));
            }
            std::vector<Series> list;
            for (auto& [_, s] : series) list.push_back(s);
            write_text_file(run.out / (name + ".svg"),
                            svg_plot("Top-k success (" + mode + ")", "population size", "success", list, false));
        } else if (std::find(csv.header.begin(), csv.header.end(), "fpr") != csv.header.end()) {
            kind = "roc";
            Series s{mode.empty() ? "roc" : mode, {}};
            const auto cf = csv.column("fpr"), ct = csv.column("tpr");
            for (const auto& r : csv.rows) s.points.emplace_back(std::stod(r[cf]), std::stod(r[ct]));
            write_text_file(run.out / (name + ".svg"),
                            svg_plot("ROC (" + mode + ")", "false positive rate", "true positive rate", {s, {"chance", {{0, 0}, {1, 1}}}}, true));
        } else {
            throw reid::ParseError(path.string() + ": neither a sweep nor a ROC table");
        }
        rows.push_back(name + ".svg," + kind + "," + (mode.empty() ? "-" : mode) + "," + std::to_string(csv.rows.size()));
    }
    run.write_csv("report.csv", "figure,kind,source_mode,rows", rows);
    run.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Genotype to face-feature re-identification and its perturbation defence"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.set_config("--config", "", "JSON config file; command-line flags take precedence");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--panel", g.panel_path, "SNP panel JSON (default: built-in 17-SNP panel)");
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores); never changes results");

    IngestArgs ia;
    auto* ingest = app.add_subcommand("ingest", "Parse raw genotype files and phenotype labels into a dataset");
    ingest->add_option("--genotypes", ia.genotypes, "Raw genotype file, collection file or directory of raw files");
    ingest->add_option("--phenotypes", ia.phenotypes, "CSV id,sex,hair,eye,skin");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit P(variant | SNP call) tables from a labelled dataset");
    fit->add_option("--dataset", fa.dataset, "Dataset directory");
    fit->add_option("--smoothing", fa.smoothing, "Add-alpha pseudocount");
    fit->add_option("--floor", fa.floor, "Probability floor");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a paired genotype / feature dataset");
    synth->add_option("--mode", sa.mode, "ideal or realistic pairing");
    synth->add_option("--count", sa.count, "Paired individuals");
    synth->add_option("--pool-size", sa.pool_size, "Size of the generated genotype pool");
    synth->add_option("--train-count", sa.train_count, "Labelled feature vectors for classifier training (0 = none)");
    synth->add_option("--pool", sa.pool, "Ingested dataset to use as the genotype pool");
    synth->add_option("--sigma", sa.sigma, "Feature noise per phenotype: sex,hair,eye,skin")->delimiter(',');
    synth->add_option("--center-low", sa.center_low, "Class-centre level off the variant's coordinates");
    synth->add_option("--center-high", sa.center_high, "Class-centre level on the variant's coordinates");

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Train one classifier per phenotype");
    trn->add_option("--dataset", ta.dataset, "Dataset with features and labels");
    trn->add_option("--test", ta.test, "Held-out dataset for accuracy");
    trn->add_option("--arch", ta.arch, "linear or mlp");
    trn->add_option("--epochs", ta.epochs);
    trn->add_option("--batch-size", ta.batch_size);
    trn->add_option("--hidden", ta.hidden, "Hidden units (mlp)");
    trn->add_option("--lr", ta.lr, "Learning rate");
    trn->add_option("--l2", ta.l2, "L2 penalty");
    trn->add_flag("--balance", ta.balance, "Weight samples inversely to class frequency");

    EvalArgs ma, swa, ra;
    auto add_eval = [](CLI::App* sub, EvalArgs& e, bool sizes) {
        sub->add_option("--dataset", e.dataset, "Paired dataset");
        sub->add_option("--model", e.model, "model.json from fit");
        sub->add_option("--classifiers", e.classifiers, "classifiers.json from train or advtrain");
        sub->add_option("--features", e.features, "Replacement features.csv, e.g. from attack");
        sub->add_option("--mode", e.mode, "predicted, oracle-all, oracle-<p>[+<p>...] or random (sweep only)");
        sub->add_flag("--normalize", e.normalize, "Normalise P(variant | genome) over variants");
        if (sizes) {
            sub->add_option("--k", e.ks, "Top-k values")->delimiter(',');
            sub->add_option("--population-sizes", e.sizes, "Population sizes n")->delimiter(',');
            sub->add_option("--trials", e.trials, "Sampled populations per probe and n");
        }
    };
    auto* match = app.add_subcommand("match", "Score every probe against every genome");
    add_eval(match, ma, false);
    match->add_option("--k", ma.ks, "Top-k values")->delimiter(',');
    auto* sweep = app.add_subcommand("sweep", "Top-k success against sampled populations");
    add_eval(sweep, swa, true);
    auto* roc = app.add_subcommand("roc", "ROC curves for the top-k and threshold schemes");
    add_eval(roc, ra, false);

    AttackArgs aa;
    auto* attack = app.add_subcommand("attack", "Perturb features with universal noise or single-phenotype PGD");
    attack->add_option("--dataset", aa.dataset);
    attack->add_option("--model", aa.model, "model.json (universal noise)");
    attack->add_option("--classifiers", aa.classifiers);
    attack->add_flag("--universal", aa.universal, "Minimise the true pair's match score");
    attack->add_option("--phenotype", aa.phenotype, "Attack one phenotype classifier");
    attack->add_option("--epsilon", aa.epsilon, "L-infinity budget");
    attack->add_option("--iterations", aa.iterations, "Steps (0 = 100 universal, 40 PGD)");
    attack->add_option("--alpha", aa.alpha, "Sign step (0 = epsilon / 10)");
    attack->add_option("--lr", aa.lr, "Adam learning rate (universal)");
    attack->add_option("--form", aa.form, "Universal objective: log or prob");
    attack->add_option("--optimizer", aa.optimizer, "Universal optimiser: adam or sign");
    attack->add_flag("--random-start", aa.random_start, "Uniform start inside the budget (PGD)");

    AdvArgs va;
    auto* adv = app.add_subcommand("advtrain", "Adversarially fine-tune classifiers");
    adv->add_option("--dataset", va.dataset, "Training dataset");
    adv->add_option("--classifiers", va.classifiers, "Starting classifiers");
    adv->add_option("--epsilon", va.epsilon);
    adv->add_option("--passes", va.passes);
    adv->add_option("--epochs", va.epochs, "Epochs per pass");
    adv->add_option("--fraction", va.fraction, "Attacked share of every mini-batch");
    adv->add_option("--lr", va.lr);

    ReportArgs rpa;
    auto* report = app.add_subcommand("report", "SVG plots from sweep and ROC CSVs");
    report->add_option("--inputs", rpa.inputs, "CSV files")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 4;
    }

    try {
        set_max_threads(g.threads ? g.threads : std::max(1u, std::thread::hardware_concurrency()));
        const CLI::App* sub = app.get_subcommands().front();
        Run run(app, sub, g);
        if (sub == ingest) cmd_ingest(run, ia);
        else if (sub == fit) cmd_fit(run, fa);
        else if (sub == synth) cmd_synth(run, sa);
        else if (sub == trn) cmd_train(run, ta);
        else if (sub == match) cmd_match(run, ma);
        else if (sub == sweep) cmd_sweep(run, swa);
        else if (sub == roc) cmd_roc(run, ra);
        else if (sub == attack) cmd_attack(run, aa);
        else if (sub == adv) cmd_advtrain(run, va);
        else cmd_report(run, rpa);
        return 0;
    } catch (const reid::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ConsistencyError& e) {
        std::cerr << "inconsistent data: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
