#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "reid/panel.hpp"

namespace reid {

/// Unordered allele pair at one SNP, stored sorted so AG == GA.
/// A default-constructed call is the missing call "--".
class GenotypeCall {
public:
    GenotypeCall() = default;
    GenotypeCall(char a, char b);

    static GenotypeCall missing() { return {}; }
    /// Parses "AG", "GA", "--". Indel and other no-call codes become missing;
    /// anything else throws ParseError.
    static GenotypeCall parse(std::string_view text);

    bool is_missing() const { return first_ == '-'; }
    char first() const { return first_; }
    char second() const { return second_; }
    std::string str() const { return {first_, second_}; }

    auto operator<=>(const GenotypeCall&) const = default;

private:
    char first_ = '-';
    char second_ = '-';
};

struct GenotypeRecord {
    std::string individual_id;
    /// One entry per panel SNP; absent SNPs are stored as missing.
    std::map<std::string, GenotypeCall, std::less<>> calls;
    bool has_y_calls = false;

    const GenotypeCall& call(std::string_view rsid) const;
    bool operator==(const GenotypeRecord&) const = default;
};

struct PhenotypeProfile {
    std::string individual_id;
    /// Variant index per phenotype, indexed by index_of(Phenotype).
    std::array<std::size_t, kNumPhenotypes> variants{};

    std::size_t variant(Phenotype p) const { return variants[index_of(p)]; }
    std::size_t& variant(Phenotype p) { return variants[index_of(p)]; }
    bool operator==(const PhenotypeProfile&) const = default;
};

/// Parses a consumer raw-genotype export (tab separated
/// `rsid chromosome position genotype`, '#' comments, LF or CRLF).
GenotypeRecord parse_raw_genotype(std::string_view text, const SnpPanel& panel,
                                  std::string individual_id = {});

/// Writes the record back in raw-genotype form: one line per panel SNP, plus
/// a Y-chromosome marker line when has_y_calls is set.
std::string serialize_raw_genotype(const GenotypeRecord& record, const SnpPanel& panel);

/// Reads several records from one document. Each individual starts with a
/// `# individual: <id>` comment line.
std::vector<GenotypeRecord> parse_genotype_collection(std::string_view text, const SnpPanel& panel);
std::string serialize_genotype_collection(const std::vector<GenotypeRecord>& records,
                                          const SnpPanel& panel);

/// CSV with header `id,sex,hair,eye,skin`. Variant names are case-insensitive.
std::vector<PhenotypeProfile> load_phenotype_labels(std::string_view text, const SnpPanel& panel);
std::string write_phenotype_labels(const std::vector<PhenotypeProfile>& profiles, const SnpPanel& panel);

/// Sex implied by the genotype file: M when any Y call is present.
std::size_t sex_from_genotype(const GenotypeRecord& record, const SnpPanel& panel);

}  // namespace reid
