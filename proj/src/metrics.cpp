#include "rxncond/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rxncond/dataset.hpp"

namespace rxncond {

std::array<std::map<int, double>, kSlotCount> topk_strict(
    const std::vector<std::array<std::vector<std::string>, kSlotCount>>& ranked_predictions,
    const std::vector<std::array<std::string, kSlotCount>>& truths, const std::vector<int>& ks) {
    if (ranked_predictions.size() != truths.size())
        throw std::invalid_argument("topk_strict: prediction/truth count mismatch");
    int max_k = 0;
    for (int k : ks) max_k = std::max(max_k, k);
    std::array<std::map<int, size_t>, kSlotCount> hits;
    for (size_t r = 0; r < truths.size(); ++r) {
        for (int s = 0; s < kSlotCount; ++s) {
            const auto& ranked = ranked_predictions[r][static_cast<size_t>(s)];
            if (static_cast<int>(ranked.size()) < max_k)
                throw std::invalid_argument("topk_strict: ranked list shorter than max k");
            const auto& truth = truths[r][static_cast<size_t>(s)];
            int rank = -1;
            for (size_t i = 0; i < ranked.size(); ++i)
                if (ranked[i] == truth) {
                    rank = static_cast<int>(i);
                    break;
                }
            for (int k : ks)
                if (rank >= 0 && rank < k) ++hits[static_cast<size_t>(s)][k];
        }
    }
    std::array<std::map<int, double>, kSlotCount> out;
    for (int s = 0; s < kSlotCount; ++s)
        for (int k : ks)
            out[static_cast<size_t>(s)][k] =
                truths.empty() ? 0.0
                               : static_cast<double>(hits[static_cast<size_t>(s)][k]) /
                                     static_cast<double>(truths.size());
    return out;
}

namespace {

std::vector<std::string> sorted_species(const std::string& joined,
                                        const ConditionGrouping& grouping) {
    auto species = grouping.split(joined);
    std::sort(species.begin(), species.end());
    return species;
}

}  // namespace

std::map<int, double> topk_sequence(const std::vector<std::vector<std::string>>& ranked_candidates,
                                    const std::vector<std::string>& truths,
                                    const std::vector<int>& ks,
                                    const ConditionGrouping& grouping) {
    if (ranked_candidates.size() != truths.size())
        throw std::invalid_argument("topk_sequence: candidate/truth count mismatch");
    std::map<int, size_t> hits;
    for (size_t r = 0; r < truths.size(); ++r) {
        const auto truth = sorted_species(truths[r], grouping);
        int rank = -1;
        for (size_t i = 0; i < ranked_candidates[r].size(); ++i) {
            if (sorted_species(ranked_candidates[r][i], grouping) == truth) {
                rank = static_cast<int>(i);
                break;
            }
        }
        for (int k : ks)
            if (rank >= 0 && rank < k) ++hits[k];
    }
    std::map<int, double> out;
    for (int k : ks)
        out[k] = truths.empty()
                     ? 0.0
                     : static_cast<double>(hits[k]) / static_cast<double>(truths.size());
    return out;
}

bool partial_match(const std::string& predicted, const std::vector<std::string>& truth_species,
                   const ConditionGrouping& grouping,
                   const std::vector<std::string>* lenient_common) {
    const auto pred = grouping.split(predicted);
    if (pred.empty()) return truth_species.empty();
    for (const auto& p : pred) {
        const bool in_truth =
            std::find(truth_species.begin(), truth_species.end(), p) != truth_species.end();
        if (in_truth) continue;
        if (lenient_common &&
            std::find(lenient_common->begin(), lenient_common->end(), p) != lenient_common->end())
            continue;
        return false;
    }
    return true;
}

double overall_top1(const std::array<std::map<int, double>, kSlotCount>& slot_accuracy) {
    double sum = 0.0;
    for (int s = 0; s < kSlotCount; ++s) sum += slot_accuracy[static_cast<size_t>(s)].at(1);
    return sum / kSlotCount;
}

void emit_report(const MetricReport& report, const std::string& json_path,
                 const std::string& csv_path) {
    {
        nlohmann::ordered_json j;
        j["model"] = report.model;
        j["record_count"] = report.record_count;
        nlohmann::ordered_json acc;
        for (const auto& [series, by_k] : report.accuracy) {
            nlohmann::ordered_json ks;
            for (const auto& [k, v] : by_k) ks["top" + std::to_string(k)] = v;
            acc[series] = ks;
        }
        j["accuracy"] = acc;
        if (!report.notes.empty()) {
            nlohmann::ordered_json notes;
            for (const auto& [key, value] : report.notes) notes[key] = value;
            j["notes"] = notes;
        }
        std::ofstream os(json_path, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write report: " + json_path);
        os << j.dump(2) << '\n';
    }
    {
        std::ofstream os(csv_path, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write report: " + csv_path);
        os << "model,series,k,accuracy\n";
        char buf[64];
        for (const auto& [series, by_k] : report.accuracy)
            for (const auto& [k, v] : by_k) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                os << report.model << ',' << series << ',' << k << ',' << buf << '\n';
            }
    }
}

std::vector<ReportRow> read_report_csv(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"model", "series", "k", "accuracy"})
        throw std::runtime_error("unexpected report CSV header in " + path);
    std::vector<ReportRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4)
            throw std::runtime_error("bad report row in " + path + " line " + std::to_string(i + 1));
        out.push_back({rows[i][0], rows[i][1], std::stoi(rows[i][2]), std::stod(rows[i][3])});
    }
    return out;
}

}  // namespace rxncond
