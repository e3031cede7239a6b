#include "rxncond/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rxncond/rng.hpp"

namespace rxncond {

// ------------------------------------------------------------ CSV input

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open CSV: " + path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    char c;
    while (is.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (is.peek() == '"') {
                    field += '"';
                    is.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            row_has_content = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && is.peek() == '\n') is.get();
            if (row_has_content || !field.empty()) {
                row.push_back(std::move(field));
                field.clear();
                rows.push_back(std::move(row));
                row.clear();
                row_has_content = false;
            }
        } else {
            field += c;
            row_has_content = true;
        }
    }
    if (in_quotes) throw std::runtime_error("unterminated quoted field in " + path);
    if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

void write_records_csv(const std::string& path, const std::vector<ReactionRecord>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open CSV for writing: " + path);
    const bool slot_flavor = records.empty() || records.front().slots.has_value();
    if (slot_flavor) {
        os << "id,rxn_smiles,catalyst,solvent1,solvent2,reagent1,reagent2,corpus\n";
        for (const auto& r : records) {
            if (!r.slots) throw std::invalid_argument("mixed record flavors in write_records_csv");
            os << csv_quote(r.id) << ',' << csv_quote(r.raw);
            for (int s = 0; s < kSlotCount; ++s) {
                const auto& label = (*r.slots)[static_cast<size_t>(s)];
                os << ',' << csv_quote(label == kNoneLabel ? std::string() : label);
            }
            os << ',' << csv_quote(r.corpus) << '\n';
        }
    } else {
        os << "id,rxn_smiles,conditions,corpus\n";
        for (const auto& r : records) {
            if (!r.joined_conditions)
                throw std::invalid_argument("mixed record flavors in write_records_csv");
            os << csv_quote(r.id) << ',' << csv_quote(r.raw) << ','
               << csv_quote(*r.joined_conditions) << ',' << csv_quote(r.corpus) << '\n';
        }
    }
    if (!os) throw std::runtime_error("CSV write failed: " + path);
}

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::map<std::string, size_t> header_index(const std::vector<std::string>& header) {
    std::map<std::string, size_t> idx;
    for (size_t i = 0; i < header.size(); ++i) idx[trim(header[i])] = i;
    return idx;
}

size_t require_column(const std::map<std::string, size_t>& idx, const std::string& name,
                      const std::string& path) {
    auto it = idx.find(name);
    if (it == idx.end()) throw std::runtime_error("CSV " + path + " lacks column '" + name + "'");
    return it->second;
}

std::string cell(const std::vector<std::string>& row, size_t i) {
    return i < row.size() ? trim(row[i]) : std::string();
}

template <class PerRow>
std::vector<ReactionRecord> load_rows(const std::string& path, const LoadOptions& opts,
                                      LoadReport* report, PerRow per_row) {
    const auto rows = read_csv(path);
    if (rows.empty()) throw std::runtime_error("CSV has no header: " + path);
    const auto idx = header_index(rows[0]);
    std::vector<ReactionRecord> out;
    LoadReport local;
    LoadReport& rep = report ? *report : local;
    for (size_t r = 1; r < rows.size(); ++r) {
        try {
            out.push_back(per_row(rows[r], idx));
            ++rep.loaded;
        } catch (const std::exception& e) {
            const std::string msg = "line " + std::to_string(r + 1) + ": " + e.what();
            if (opts.strict) throw std::runtime_error(path + ": " + msg);
            ++rep.skipped;
            rep.errors.push_back(msg);
        }
    }
    return out;
}

}  // namespace

std::vector<ReactionRecord> load_condition_csv(const std::string& path, const LoadOptions& opts,
                                               LoadReport* report) {
    const auto& cols = opts.columns;
    return load_rows(path, opts, report,
                     [&](const std::vector<std::string>& row,
                         const std::map<std::string, size_t>& idx) {
                         ReactionRecord rec =
                             make_record(cell(row, require_column(idx, cols.id, path)),
                                         cell(row, require_column(idx, cols.reaction, path)));
                         std::array<std::string, kSlotCount> slots;
                         for (int s = 0; s < kSlotCount; ++s) {
                             const std::string v = cell(
                                 row, require_column(idx, cols.slots[static_cast<size_t>(s)], path));
                             slots[static_cast<size_t>(s)] = v.empty() ? kNoneLabel : v;
                         }
                         rec.slots = slots;
                         auto cit = idx.find(cols.corpus);
                         if (cit != idx.end()) rec.corpus = cell(row, cit->second);
                         return rec;
                     });
}

std::vector<ReactionRecord> load_500mt_csv(const std::string& path,
                                           const ConditionGrouping& grouping,
                                           const LoadOptions& opts, LoadReport* report) {
    const auto& cols = opts.columns;
    return load_rows(path, opts, report,
                     [&](const std::vector<std::string>& row,
                         const std::map<std::string, size_t>& idx) {
                         ReactionRecord rec =
                             make_record(cell(row, require_column(idx, cols.id, path)),
                                         cell(row, require_column(idx, cols.reaction, path)));
                         const std::string joined =
                             cell(row, require_column(idx, cols.conditions, path));
                         if (joined.empty()) throw std::runtime_error("empty condition string");
                         rec.joined_conditions = joined;
                         rec.condition_species = grouping.split(joined);
                         auto cit = idx.find(cols.corpus);
                         if (cit != idx.end()) rec.corpus = cell(row, cit->second);
                         return rec;
                     });
}

// --------------------------------------------------------------- splits

SplitIndices split_indices(size_t n, uint64_t seed) {
    if (n < 10) throw std::invalid_argument("split requires at least 10 records");
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x811));
    rng.shuffle(order);
    const size_t n_valid = n / 10;
    const size_t n_test = n / 10;
    const size_t n_train = n - n_valid - n_test;
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    s.valid.assign(order.begin() + static_cast<long>(n_train),
                   order.begin() + static_cast<long>(n_train + n_valid));
    s.test.assign(order.begin() + static_cast<long>(n_train + n_valid), order.end());
    return s;
}

Splits split_811(const std::vector<ReactionRecord>& records, uint64_t seed) {
    const SplitIndices idx = split_indices(records.size(), seed);
    Splits out;
    out.train.reserve(idx.train.size());
    out.valid.reserve(idx.valid.size());
    out.test.reserve(idx.test.size());
    for (size_t i : idx.train) out.train.push_back(records[i]);
    for (size_t i : idx.valid) out.valid.push_back(records[i]);
    for (size_t i : idx.test) out.test.push_back(records[i]);
    return out;
}

// ------------------------------------------------------------- sparsity

SparsityReport sparsity_report(const std::vector<ReactionRecord>& records) {
    SparsityReport rep;
    rep.total = records.size();
    for (const auto& r : records) {
        if (!r.slots) throw std::invalid_argument("sparsity report needs slot-flavor records");
        for (int s = 0; s < kSlotCount; ++s)
            if ((*r.slots)[static_cast<size_t>(s)] != kNoneLabel)
                ++rep.slots[static_cast<size_t>(s)].non_empty;
    }
    if (rep.total > 0)
        for (auto& s : rep.slots)
            s.density = static_cast<double>(s.non_empty) / static_cast<double>(rep.total);
    return rep;
}

// ------------------------------------------------------------ power law

PowerLawFit power_law_fit(const std::vector<double>& counts) {
    std::vector<double> xs;
    xs.reserve(counts.size());
    for (double c : counts)
        if (c > 0) xs.push_back(c);
    if (xs.size() < 20)
        throw std::invalid_argument("power_law_fit needs at least 20 positive counts");
    std::sort(xs.begin(), xs.end());
    if (xs.front() == xs.back())
        throw std::domain_error("power_law_fit: degenerate all-equal counts");

    const size_t n_all = xs.size();
    // suffix sums of ln(x) for O(1) tail statistics per candidate
    std::vector<double> suffix_log(n_all + 1, 0.0);
    for (size_t i = n_all; i-- > 0;) suffix_log[i] = suffix_log[i + 1] + std::log(xs[i]);

    std::vector<double> uniq;
    for (size_t i = 0; i < n_all; ++i)
        if (i == 0 || xs[i] != xs[i - 1]) uniq.push_back(xs[i]);
    // cap the sweep; evenly spaced through the unique values
    std::vector<double> candidates;
    constexpr size_t kMaxCandidates = 256;
    if (uniq.size() <= kMaxCandidates) {
        candidates = uniq;
    } else {
        for (size_t k = 0; k < kMaxCandidates; ++k)
            candidates.push_back(uniq[k * uniq.size() / kMaxCandidates]);
    }

    PowerLawFit best;
    bool found = false;
    constexpr size_t kMinTail = 10;
    for (double xmin : candidates) {
        const size_t first =
            static_cast<size_t>(std::lower_bound(xs.begin(), xs.end(), xmin) - xs.begin());
        const size_t n = n_all - first;
        if (n < kMinTail) continue;
        const double denom = suffix_log[first] - static_cast<double>(n) * std::log(xmin);
        if (denom <= 0) continue;
        const double alpha = 1.0 + static_cast<double>(n) / denom;
        // KS distance between the empirical tail CDF and 1-(x/xmin)^(1-alpha)
        double ks = 0.0;
        for (size_t i = first; i < n_all; ++i) {
            const double emp_hi = static_cast<double>(i - first + 1) / static_cast<double>(n);
            const double emp_lo = static_cast<double>(i - first) / static_cast<double>(n);
            const double th = 1.0 - std::pow(xs[i] / xmin, 1.0 - alpha);
            ks = std::max(ks, std::max(std::abs(emp_hi - th), std::abs(emp_lo - th)));
        }
        if (!found || ks < best.ks) {
            best.alpha = alpha;
            best.xmin = xmin;
            best.ks = ks;
            best.tail_count = n;
            found = true;
        }
    }
    if (!found) throw std::domain_error("power_law_fit: no viable tail found");
    return best;
}

std::map<std::string, size_t> species_frequencies(const std::vector<ReactionRecord>& records) {
    std::map<std::string, size_t> freq;
    for (const auto& r : records) {
        if (r.slots) {
            for (int s = 0; s < kSlotCount; ++s) {
                const auto& label = (*r.slots)[static_cast<size_t>(s)];
                if (label != kNoneLabel) ++freq[label];
            }
        } else {
            for (const auto& sp : r.condition_species) ++freq[sp];
        }
    }
    return freq;
}

// ----------------------------------------------------------- vocabulary

std::pair<CondVocab, TokenVocab> build_vocabs(const std::vector<ReactionRecord>& train) {
    CondVocab cond;
    TokenVocab tok;
    // frequency-ordered slot labels, ties broken lexicographically
    std::array<std::map<std::string, size_t>, kSlotCount> freq;
    for (const auto& r : train) {
        if (r.slots)
            for (int s = 0; s < kSlotCount; ++s) {
                const auto& label = (*r.slots)[static_cast<size_t>(s)];
                if (label != kNoneLabel) ++freq[static_cast<size_t>(s)][label];
            }
        tok.add_reaction_tokens(r.raw);
        if (r.joined_conditions) tok.add_reaction_tokens(*r.joined_conditions);
        if (r.slots)
            for (int s = 0; s < kSlotCount; ++s) {
                const auto& label = (*r.slots)[static_cast<size_t>(s)];
                if (label == kNoneLabel) continue;
                try {
                    tok.add_reaction_tokens(label);
                } catch (const SmilesError&) {
                    // non-SMILES label text only matters to the classification head
                }
            }
    }
    for (int s = 0; s < kSlotCount; ++s) {
        std::vector<std::pair<std::string, size_t>> ordered(freq[static_cast<size_t>(s)].begin(),
                                                            freq[static_cast<size_t>(s)].end());
        std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [label, _] : ordered) cond.add(s, label);
    }
    return {std::move(cond), std::move(tok)};
}

}  // namespace rxncond
