#include "reid/panel.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "reid/error.hpp"

namespace reid {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string_view to_string(Phenotype p) {
    switch (p) {
        case Phenotype::sex: return "sex";
        case Phenotype::hair: return "hair";
        case Phenotype::eye: return "eye";
        case Phenotype::skin: return "skin";
    }
    return "?";
}

std::optional<Phenotype> phenotype_from_string(std::string_view name) {
    const std::string key = lower(name);
    for (Phenotype p : kPhenotypes)
        if (to_string(p) == key) return p;
    return std::nullopt;
}

SnpPanel::SnpPanel(std::array<Entry, kNumPhenotypes> entries) : entries_(std::move(entries)) {
    for (Phenotype p : kPhenotypes) {
        const Entry& e = entries_[index_of(p)];
        if (e.variants.size() < 2)
            throw ParseError("panel: phenotype " + std::string(to_string(p)) + " needs at least two variants");
        std::set<std::string> names;
        for (const auto& v : e.variants) {
            if (v.empty()) throw ParseError("panel: empty variant name for " + std::string(to_string(p)));
            if (!names.insert(lower(v)).second)
                throw ParseError("panel: duplicate variant " + v + " for " + std::string(to_string(p)));
        }
        for (const auto& rsid : e.snps) {
            if (rsid.empty()) throw ParseError("panel: empty SNP identifier");
            if (!owner_.emplace(rsid, p).second)
                throw ParseError("panel: SNP " + rsid + " listed under two phenotypes");
        }
    }
    const Entry& sex = entries_[index_of(Phenotype::sex)];
    if (!sex.snps.empty()) throw ParseError("panel: sex is read from the Y chromosome and takes no SNPs");
    if (sex.variants.size() != 2 || !variant_index(Phenotype::sex, "F") || !variant_index(Phenotype::sex, "M"))
        throw ParseError("panel: sex variants must be exactly {F, M}");
    male_index_ = *variant_index(Phenotype::sex, "M");
}

SnpPanel SnpPanel::default_panel() {
    std::array<Entry, kNumPhenotypes> e;
    e[index_of(Phenotype::sex)] = {{}, {"F", "M"}};
    e[index_of(Phenotype::hair)] = {{"rs12821256", "rs35264875"}, {"black", "blonde", "brown"}};
    e[index_of(Phenotype::eye)] = {{"rs916977", "rs1129038", "rs1800401", "rs2238289", "rs2240203",
                                    "rs3935591", "rs4778241", "rs7183877", "rs8028689", "rs12593929",
                                    "rs1800407", "rs7495174"},
                                   {"blue", "brown", "intermediate"}};
    e[index_of(Phenotype::skin)] = {{"rs26722", "rs1667394", "rs16891982"}, {"pale", "intermediate", "dark"}};
    return SnpPanel(std::move(e));
}

SnpPanel SnpPanel::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("panel: expected a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!phenotype_from_string(key)) throw ParseError("panel: unknown phenotype " + key);
    std::array<Entry, kNumPhenotypes> e;
    for (Phenotype p : kPhenotypes) {
        const std::string name(to_string(p));
        if (!doc.contains(name)) throw ParseError("panel: missing phenotype " + name);
        const auto& item = doc.at(name);
        try {
            e[index_of(p)].snps = item.value("snps", std::vector<std::string>{});
            e[index_of(p)].variants = item.at("variants").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("panel: " + name + ": " + ex.what());
        }
    }
    return SnpPanel(std::move(e));
}

nlohmann::json SnpPanel::to_json() const {
    nlohmann::json doc = nlohmann::json::object();
    for (Phenotype p : kPhenotypes)
        doc[std::string(to_string(p))] = {{"snps", snps(p)}, {"variants", variants(p)}};
    return doc;
}

std::optional<std::size_t> SnpPanel::variant_index(Phenotype p, std::string_view name) const {
    const std::string key = lower(name);
    const auto& vs = variants(p);
    for (std::size_t i = 0; i < vs.size(); ++i)
        if (lower(vs[i]) == key) return i;
    return std::nullopt;
}

std::optional<Phenotype> SnpPanel::owner(std::string_view rsid) const {
    auto it = owner_.find(rsid);
    if (it == owner_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> SnpPanel::all_snps() const {
    std::vector<std::string> out;
    for (Phenotype p : kPhenotypes) out.insert(out.end(), snps(p).begin(), snps(p).end());
    return out;
}

std::size_t SnpPanel::total_variants() const {
    std::size_t n = 0;
    for (Phenotype p : kPhenotypes) n += num_variants(p);
    return n;
}

}  // namespace reid
