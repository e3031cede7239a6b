#pragma once

// Evaluation metrics: strict per-slot top-k accuracy, order-free
// sequence top-k accuracy, partial-match accuracy for OOD transfer, and
// report emission (JSON summary + long-format CSV).

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rxncond/smiles.hpp"

namespace rxncond {

// hit@k iff the truth label appears among the first k ranked labels;
// averaged over records, each slot independent
std::array<std::map<int, double>, kSlotCount> topk_strict(
    const std::vector<std::array<std::vector<std::string>, kSlotCount>>& ranked_predictions,
    const std::vector<std::array<std::string, kSlotCount>>& truths, const std::vector<int>& ks);

// hit@k iff any of the first k candidates matches the truth as an
// order-free multiset of species (after grouping-aware splitting)
std::map<int, double> topk_sequence(const std::vector<std::vector<std::string>>& ranked_candidates,
                                    const std::vector<std::string>& truths,
                                    const std::vector<int>& ks, const ConditionGrouping& grouping);

// 1 iff every predicted species belongs to the ground-truth species set;
// the empty prediction matches only the empty truth. `lenient_common`,
// when given, exempts predicted species found in that list from the
// membership requirement.
bool partial_match(const std::string& predicted, const std::vector<std::string>& truth_species,
                   const ConditionGrouping& grouping,
                   const std::vector<std::string>* lenient_common = nullptr);

struct MetricReport {
    std::string model;
    size_t record_count = 0;
    // series name ("catalyst", ..., "sequence", "partial_reagent", ...)
    // -> k -> accuracy
    std::map<std::string, std::map<int, double>> accuracy;
    std::map<std::string, std::string> notes;
};

// mean of the five slot top-1 accuracies; reported with a note marking
// the local definition
double overall_top1(const std::array<std::map<int, double>, kSlotCount>& slot_accuracy);

void emit_report(const MetricReport& report, const std::string& json_path,
                 const std::string& csv_path);

struct ReportRow {
    std::string model, series;
    int k = 0;
    double accuracy = 0.0;
};
std::vector<ReportRow> read_report_csv(const std::string& path);

}  // namespace rxncond
