#include "reid/genotype.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "reid/error.hpp"

namespace reid {

namespace {

constexpr std::string_view kIndividualMarker = "# individual:";
constexpr std::string_view kYMarkerId = "i_ycall";

bool is_base(char c) { return c == 'A' || c == 'C' || c == 'G' || c == 'T'; }
bool is_no_call(char c) { return c == '-' || c == 'I' || c == 'D'; }

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Splits on LF and strips a trailing CR from each line.
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t end = line.find(sep, start);
        if (end == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, end - start));
        start = end + 1;
    }
}

// Validates the genotype column. Returns the normalised text, where a single
// base is a haploid call (X, Y, MT) and "--" marks any no-call.
std::string normalise_genotype(std::string_view raw, std::size_t line_no) {
    if (raw.empty() || raw.size() > 2) throw ParseError("genotype must have one or two alleles", line_no);
    std::string out;
    for (char c : raw) {
        const char u = upper(c);
        if (!is_base(u) && !is_no_call(u))
            throw ParseError(std::string("invalid allele character '") + c + "'", line_no);
        out.push_back(u);
    }
    if (std::any_of(out.begin(), out.end(), is_no_call)) return "--";
    return out;
}

GenotypeRecord parse_lines(const std::vector<std::string_view>& lines, std::size_t first, std::size_t last,
                           const SnpPanel& panel, std::string individual_id) {
    GenotypeRecord record;
    record.individual_id = std::move(individual_id);
    std::map<std::string, std::pair<GenotypeCall, std::size_t>, std::less<>> seen;
    std::size_t data_lines = 0;

    for (std::size_t i = first; i < last; ++i) {
        const std::size_t line_no = i + 1;
        const std::string_view line = lines[i];
        if (line.empty() || line.front() == '#') continue;
        if (trim(line).empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 4)
            throw ParseError("expected 4 tab-separated columns, found " + std::to_string(cols.size()), line_no);
        ++data_lines;
        const std::string_view rsid = cols[0];
        if (rsid.empty()) throw ParseError("empty SNP identifier", line_no);
        const std::string genotype = normalise_genotype(cols[3], line_no);

        if (cols[1] == "Y" && genotype != "--") record.has_y_calls = true;
        if (!panel.contains(rsid)) continue;

        // Haploid calls at a panel SNP carry no diploid genotype.
        const GenotypeCall call =
            genotype.size() == 2 ? GenotypeCall::parse(genotype) : GenotypeCall::missing();
        auto [it, inserted] = seen.try_emplace(std::string(rsid), call, line_no);
        if (!inserted && it->second.first != call)
            throw ConsistencyError("line " + std::to_string(line_no) + ": conflicting calls for " +
                                   std::string(rsid) + " (first seen on line " +
                                   std::to_string(it->second.second) + ")");
    }
    if (data_lines == 0) throw ParseError("genotype document has no data lines");

    for (const auto& rsid : panel.all_snps()) {
        auto it = seen.find(rsid);
        record.calls[rsid] = it == seen.end() ? GenotypeCall::missing() : it->second.first;
    }
    return record;
}

}  // namespace

GenotypeCall::GenotypeCall(char a, char b) {
    a = upper(a);
    b = upper(b);
    if (!is_base(a) || !is_base(b)) throw ParseError(std::string("invalid allele pair ") + a + b);
    first_ = std::min(a, b);
    second_ = std::max(a, b);
}

GenotypeCall GenotypeCall::parse(std::string_view text) {
    if (text.size() != 2) throw ParseError("genotype call must have two alleles: " + std::string(text));
    const char a = upper(text[0]), b = upper(text[1]);
    if (is_no_call(a) || is_no_call(b)) {
        if ((is_no_call(a) || is_base(a)) && (is_no_call(b) || is_base(b))) return missing();
    }
    return {a, b};
}

const GenotypeCall& GenotypeRecord::call(std::string_view rsid) const {
    static const GenotypeCall kMissing;
    auto it = calls.find(rsid);
    return it == calls.end() ? kMissing : it->second;
}

GenotypeRecord parse_raw_genotype(std::string_view text, const SnpPanel& panel, std::string individual_id) {
    const auto lines = split_lines(text);
    return parse_lines(lines, 0, lines.size(), panel, std::move(individual_id));
}

std::string serialize_raw_genotype(const GenotypeRecord& record, const SnpPanel& panel) {
    std::ostringstream out;
    out << "# rsid\tchromosome\tposition\tgenotype\n";
    for (const auto& rsid : panel.all_snps()) out << rsid << "\t0\t0\t" << record.call(rsid).str() << '\n';
    if (record.has_y_calls) out << kYMarkerId << "\tY\t0\tA\n";
    return out.str();
}

std::vector<GenotypeRecord> parse_genotype_collection(std::string_view text, const SnpPanel& panel) {
    const auto lines = split_lines(text);
    std::vector<GenotypeRecord> out;
    std::set<std::string> ids;
    std::size_t section_start = 0;
    std::string current_id;
    bool in_section = false;

    auto close_section = [&](std::size_t end) {
        if (!in_section) return;
        if (!ids.insert(current_id).second) throw ConsistencyError("duplicate individual " + current_id);
        out.push_back(parse_lines(lines, section_start, end, panel, current_id));
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = lines[i];
        if (line.starts_with(kIndividualMarker)) {
            close_section(i);
            current_id = std::string(trim(line.substr(kIndividualMarker.size())));
            if (current_id.empty()) throw ParseError("empty individual id", i + 1);
            section_start = i + 1;
            in_section = true;
        } else if (!in_section && !line.empty() && line.front() != '#' && !trim(line).empty()) {
            throw ParseError("data line before the first '# individual:' header", i + 1);
        }
    }
    close_section(lines.size());
    return out;
}

std::string serialize_genotype_collection(const std::vector<GenotypeRecord>& records, const SnpPanel& panel) {
    std::string out;
    for (const auto& r : records) {
        out += std::string(kIndividualMarker) + " " + r.individual_id + "\n";
        out += serialize_raw_genotype(r, panel);
    }
    return out;
}

std::vector<PhenotypeProfile> load_phenotype_labels(std::string_view text, const SnpPanel& panel) {
    const auto lines = split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i == lines.size()) throw ParseError("phenotype file is empty");

    const auto header = split(trim(lines[i]), ',');
    static const std::array<std::string_view, 5> expected = {"id", "sex", "hair", "eye", "skin"};
    bool header_ok = header.size() == expected.size();
    for (std::size_t c = 0; header_ok && c < header.size(); ++c) header_ok = trim(header[c]) == expected[c];
    if (!header_ok) throw ParseError("expected header id,sex,hair,eye,skin", i + 1);

    std::vector<PhenotypeProfile> out;
    std::set<std::string> ids;
    for (++i; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string_view line = trim(lines[i]);
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 5) throw ParseError("expected 5 columns", line_no);
        PhenotypeProfile profile;
        profile.individual_id = std::string(trim(cols[0]));
        if (profile.individual_id.empty()) throw ParseError("empty id", line_no);
        for (Phenotype p : kPhenotypes) {
            const std::string_view value = trim(cols[1 + index_of(p)]);
            const auto v = panel.variant_index(p, value);
            if (!v)
                throw ParseError("row " + profile.individual_id + ": unknown variant " + std::string(value) +
                                     " for " + std::string(to_string(p)),
                                 line_no);
            profile.variant(p) = *v;
        }
        if (!ids.insert(profile.individual_id).second)
            throw ConsistencyError("line " + std::to_string(line_no) + ": duplicate id " + profile.individual_id);
        out.push_back(std::move(profile));
    }
    return out;
}

std::string write_phenotype_labels(const std::vector<PhenotypeProfile>& profiles, const SnpPanel& panel) {
    std::string out = "id,sex,hair,eye,skin\n";
    for (const auto& p : profiles) {
        out += p.individual_id;
        for (Phenotype ph : kPhenotypes) out += "," + panel.variants(ph).at(p.variant(ph));
        out += '\n';
    }
    return out;
}

std::size_t sex_from_genotype(const GenotypeRecord& record, const SnpPanel& panel) {
    return record.has_y_calls ? panel.male_index() : 1 - panel.male_index();
}

}  // namespace reid
