#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace reid {

enum class Phenotype : std::size_t { sex = 0, hair = 1, eye = 2, skin = 3 };

inline constexpr std::size_t kNumPhenotypes = 4;
inline constexpr std::array<Phenotype, kNumPhenotypes> kPhenotypes = {
    Phenotype::sex, Phenotype::hair, Phenotype::eye, Phenotype::skin};

constexpr std::size_t index_of(Phenotype p) { return static_cast<std::size_t>(p); }

std::string_view to_string(Phenotype p);
std::optional<Phenotype> phenotype_from_string(std::string_view name);

/// SNPs and variant names per visible phenotype. Sex carries no SNPs: it is
/// read from the presence of Y-chromosome calls, and its variants must be
/// exactly {F, M}.
class SnpPanel {
public:
    struct Entry {
        std::vector<std::string> snps;
        std::vector<std::string> variants;
    };

    /// The 17-SNP panel used for sex, hair, eye and skin colour.
    static SnpPanel default_panel();

    /// Throws ParseError when the document is not a valid panel.
    static SnpPanel from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

    const std::vector<std::string>& snps(Phenotype p) const { return entries_[index_of(p)].snps; }
    const std::vector<std::string>& variants(Phenotype p) const { return entries_[index_of(p)].variants; }
    std::size_t num_variants(Phenotype p) const { return variants(p).size(); }

    /// Case-insensitive lookup of a variant name.
    std::optional<std::size_t> variant_index(Phenotype p, std::string_view name) const;
    /// Index of "M" within the sex variants.
    std::size_t male_index() const { return male_index_; }

    std::optional<Phenotype> owner(std::string_view rsid) const;
    bool contains(std::string_view rsid) const { return owner(rsid).has_value(); }

    /// Every panel SNP, grouped by phenotype in the order of kPhenotypes.
    std::vector<std::string> all_snps() const;
    std::size_t total_variants() const;

    bool operator==(const SnpPanel& other) const { return to_json() == other.to_json(); }

private:
    explicit SnpPanel(std::array<Entry, kNumPhenotypes> entries);

    std::array<Entry, kNumPhenotypes> entries_;
    std::map<std::string, Phenotype, std::less<>> owner_;
    std::size_t male_index_ = 1;
};

}  // namespace reid
