// Command-line front end: build-data, stats, train, evaluate, recommend,
// check-grad.

#include <omp.h>

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rxncond/retrieval.hpp"
#include "rxncond/trainer.hpp"

using namespace rxncond;

namespace {

ConditionGrouping load_grouping(const std::string& path) {
    return path.empty() ? ConditionGrouping::builtin_defaults()
                        : ConditionGrouping::from_file(path);
}

std::vector<PromptTemplate> load_template_bank(const std::string& path) {
    return path.empty() ? builtin_templates() : load_templates(path);
}

std::vector<int> parse_ks(const std::string& csv) {
    std::vector<int> ks;
    std::string cur;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!cur.empty()) ks.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (ks.empty()) throw CLI::ValidationError("--topk", "needs at least one k");
    return ks;
}

int cmd_build_data(const std::string& input, const std::string& flavor,
                   const std::string& templates, uint64_t seed, int expand,
                   const std::string& output, const std::string& groups,
                   const std::string& corpus_pool, bool strict) {
    LoadOptions opts;
    opts.strict = strict;
    LoadReport rep;
    std::vector<ReactionRecord> records;
    if (flavor == "condition") {
        records = load_condition_csv(input, opts, &rep);
    } else if (flavor == "500mt") {
        records = load_500mt_csv(input, load_grouping(groups), opts, &rep);
    } else {
        throw CLI::ValidationError("--flavor", "expected condition or 500mt");
    }
    if (!corpus_pool.empty()) {
        const CorpusIndex index = CorpusIndex::from_jsonl(corpus_pool);
        for (auto& r : records) {
            auto hits = index.retrieve_similar(r, 1);
            r.corpus = hits.empty() ? std::string() : hits[0].corpus;
        }
    }
    const auto examples = build_qa_dataset(records, load_template_bank(templates), seed, expand);
    write_examples_jsonl(output, examples);
    nlohmann::ordered_json summary;
    summary["input"] = input;
    summary["flavor"] = flavor;
    summary["loaded"] = rep.loaded;
    summary["skipped"] = rep.skipped;
    summary["examples"] = examples.size();
    summary["output"] = output;
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_stats(const std::string& input, const std::string& flavor, const std::string& groups,
              const std::string& output) {
    LoadOptions opts;
    LoadReport rep;
    std::vector<ReactionRecord> records;
    if (flavor == "condition") records = load_condition_csv(input, opts, &rep);
    else if (flavor == "500mt") records = load_500mt_csv(input, load_grouping(groups), opts, &rep);
    else throw CLI::ValidationError("--flavor", "expected condition or 500mt");

    nlohmann::ordered_json j;
    j["records"] = records.size();
    j["skipped"] = rep.skipped;
    if (flavor == "condition") {
        const auto sp = sparsity_report(records);
        nlohmann::ordered_json slots;
        for (int s = 0; s < kSlotCount; ++s) {
            nlohmann::ordered_json slot;
            slot["non_empty_count"] = sp.slots[static_cast<size_t>(s)].non_empty;
            slot["density"] = sp.slots[static_cast<size_t>(s)].density;
            slots[kSlotNames[static_cast<size_t>(s)]] = slot;
        }
        j["sparsity"] = slots;
    }
    const auto freq = species_frequencies(records);
    j["condition_categories"] = freq.size();
    if (freq.size() >= 20) {
        std::vector<double> counts;
        counts.reserve(freq.size());
        for (const auto& [_, c] : freq) counts.push_back(static_cast<double>(c));
        try {
            const auto fit = power_law_fit(counts);
            nlohmann::ordered_json pl;
            pl["alpha"] = fit.alpha;
            pl["xmin"] = fit.xmin;
            pl["ks_distance"] = fit.ks;
            pl["tail_count"] = fit.tail_count;
            j["power_law"] = pl;
        } catch (const std::domain_error& e) {
            j["power_law"] = std::string("degenerate: ") + e.what();
        }
    } else {
        j["power_law"] = "skipped: fewer than 20 condition categories";
    }
    if (output.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        std::ofstream os(output, std::ios::binary | std::ios::trunc);
        os << j.dump(2) << '\n';
        std::cout << "wrote " << output << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    apply_precision_env();
    CLI::App app{"reaction condition recommendation pipeline"};
    app.require_subcommand(1);
    std::string precision;
    app.add_option("--precision", precision, "scalar precision (f32|f64); overrides RXNCOND_PRECISION");

    // ------------------------------------------------------- build-data
    auto* bd = app.add_subcommand("build-data", "CSV -> JSONL instruction dataset");
    std::string bd_input, bd_flavor = "condition", bd_templates, bd_output = "examples.jsonl";
    std::string bd_groups, bd_pool;
    uint64_t bd_seed = 0;
    int bd_expand = 1;
    bool bd_strict = false;
    bd->add_option("--input", bd_input, "input CSV")->required();
    bd->add_option("--flavor", bd_flavor, "condition|500mt");
    bd->add_option("--templates", bd_templates, "template bank file (default: bundled bank)");
    bd->add_option("--seed", bd_seed, "template sampling seed");
    bd->add_option("--expand", bd_expand, "examples per record");
    bd->add_option("--output", bd_output, "output JSONL path");
    bd->add_option("--groups", bd_groups, "curated ion-pair grouping file");
    bd->add_option("--corpus-pool", bd_pool,
                   "JSONL corpus pool; fills each record with its most similar corpus");
    bd->add_flag("--strict", bd_strict, "abort on the first malformed row");

    // ------------------------------------------------------------ stats
    auto* st = app.add_subcommand("stats", "sparsity / power-law report for a CSV");
    std::string st_input, st_flavor = "condition", st_groups, st_output;
    st->add_option("--input", st_input, "input CSV")->required();
    st->add_option("--flavor", st_flavor, "condition|500mt");
    st->add_option("--groups", st_groups, "curated ion-pair grouping file");
    st->add_option("--output", st_output, "output JSON path (default: stdout)");

    // ------------------------------------------------------------ train
    auto* tr = app.add_subcommand("train", "train a model from an instruction JSONL");
    std::string tr_config, tr_task, tr_data, tr_out;
    std::vector<std::string> tr_freeze;
    uint64_t tr_seed = 0;
    bool tr_seed_set = false, tr_task_set = false;
    int tr_epochs = 0, tr_threads = -1;
    double tr_maxlr = 0;
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--task", tr_task, "classify|generate")->each([&](const std::string&) {
        tr_task_set = true;
    });
    tr->add_option("--data", tr_data, "training JSONL (overrides config)");
    tr->add_option("--out", tr_out, "output directory (overrides config)");
    tr->add_option("--freeze", tr_freeze, "parameter prefixes excluded from updates");
    tr->add_option("--seed", tr_seed, "training seed")->each([&](const std::string&) {
        tr_seed_set = true;
    });
    tr->add_option("--epochs", tr_epochs, "epoch count (overrides config)");
    tr->add_option("--max-lr", tr_maxlr, "peak learning rate (overrides config)");
    tr->add_option("--threads", tr_threads, "OpenMP thread count");

    // --------------------------------------------------------- evaluate
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a JSONL split");
    EvalOptions eopts;
    std::string ev_ks = "1,3,5";
    ev->add_option("--checkpoint", eopts.checkpoint, "model checkpoint (.ntf)")->required();
    ev->add_option("--split", eopts.data_jsonl, "evaluation JSONL")->required();
    ev->add_option("--topk", ev_ks, "comma-separated k values");
    ev->add_option("--beam-width", eopts.beam_width, "beam width for generation");
    ev->add_option("--max-len", eopts.max_len, "generation length limit");
    ev->add_option("--groups", eopts.groups_file, "curated ion-pair grouping file");
    ev->add_option("--out-json", eopts.out_json, "report JSON path");
    ev->add_option("--out-csv", eopts.out_csv, "report CSV path");
    ev->add_option("--partial-role", eopts.partial_role,
                   "score top-1 partial match against slot-flavor truths (reagent|catalyst|solvent)");
    ev->add_option("--lenient-common", eopts.lenient_common_file,
                   "common-solvent list; exempts those species in partial matching");
    ev->add_option("--model-name", eopts.model_name, "model column in the report");

    // -------------------------------------------------------- recommend
    auto* rc = app.add_subcommand("recommend", "rank conditions for one reaction");
    RecommendOptions ropts;
    std::string rc_cand_file;
    rc->add_option("--checkpoint", ropts.checkpoint, "model checkpoint (.ntf)")->required();
    rc->add_option("--reaction", ropts.reaction, "reaction SMILES")->required();
    rc->add_option("--role", ropts.role, "condition slot (classification checkpoints)");
    rc->add_option("--candidates", rc_cand_file, "file with one candidate per line");
    rc->add_option("--topk", ropts.k, "number of recommendations");
    rc->add_option("--beam-width", ropts.beam_width, "beam width (generation)");

    // -------------------------------------------------------- check-grad
    auto* cg = app.add_subcommand("check-grad", "finite-difference gradient suite");
    uint64_t cg_seed = 42;
    cg->add_option("--seed", cg_seed, "suite seed");

    // ------------------------------------------------------ make-fixture
    auto* mf = app.add_subcommand("make-fixture", "write a synthetic reaction CSV for smoke runs");
    std::string mf_output = "fixture.csv", mf_flavor = "condition";
    int mf_records = 128;
    uint64_t mf_seed = 0;
    mf->add_option("--output", mf_output, "output CSV path");
    mf->add_option("--flavor", mf_flavor, "condition|500mt");
    mf->add_option("--records", mf_records, "record count");
    mf->add_option("--seed", mf_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);
    if (!precision.empty()) set_default_dtype(parse_dtype(precision));

    try {
        if (*bd)
            return cmd_build_data(bd_input, bd_flavor, bd_templates, bd_seed, bd_expand, bd_output,
                                  bd_groups, bd_pool, bd_strict);
        if (*st) return cmd_stats(st_input, st_flavor, st_groups, st_output);
        if (*tr) {
            TrainConfig cfg = tr_config.empty() ? TrainConfig{} : load_train_config(tr_config);
            if (tr_task_set) cfg.task = parse_task(tr_task);
            if (!tr_data.empty()) cfg.train_jsonl = tr_data;
            if (!tr_out.empty()) cfg.out_dir = tr_out;
            if (!tr_freeze.empty()) cfg.freeze_prefixes = tr_freeze;
            if (tr_seed_set) cfg.seed = tr_seed;
            if (tr_epochs > 0) cfg.epochs = tr_epochs;
            if (tr_maxlr > 0) cfg.max_lr = tr_maxlr;
            if (tr_threads >= 0) cfg.threads = tr_threads;
            if (cfg.train_jsonl.empty())
                throw std::runtime_error("no training data: set --data or train_jsonl in the config");
            const TrainResult result = train(cfg);
            nlohmann::ordered_json j;
            j["checkpoint"] = result.checkpoint;
            j["final_loss"] = result.final_loss;
            j["steps"] = result.steps_run;
            j["epochs"] = result.epochs_run;
            if (result.train_accuracy >= 0) j["train_accuracy"] = result.train_accuracy;
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*ev) {
            eopts.ks = parse_ks(ev_ks);
            const MetricReport report = evaluate(eopts);
            std::cout << "wrote " << eopts.out_json << " and " << eopts.out_csv << " ("
                      << report.record_count << " records)\n";
            return 0;
        }
        if (*rc) {
            if (!rc_cand_file.empty()) {
                std::ifstream is(rc_cand_file);
                if (!is) throw std::runtime_error("cannot open candidates: " + rc_cand_file);
                std::string line;
                while (std::getline(is, line)) {
                    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
                        line.pop_back();
                    if (!line.empty()) ropts.candidates.push_back(line);
                }
            }
            const auto ranked = recommend(ropts);
            for (size_t i = 0; i < ranked.size(); ++i)
                std::cout << i + 1 << ". " << ranked[i].first << "  (score " << ranked[i].second
                          << ")\n";
            return 0;
        }
        if (*mf) {
            FixtureSpec spec;
            spec.records = mf_records;
            spec.seed = mf_seed;
            if (mf_flavor == "500mt") spec.generation = true;
            else if (mf_flavor != "condition")
                throw CLI::ValidationError("--flavor", "expected condition or 500mt");
            write_records_csv(mf_output, make_synthetic_records(spec));
            std::cout << "wrote " << mf_records << " records to " << mf_output << '\n';
            return 0;
        }
        if (*cg) {
            const auto rep = run_full_gradient_suite(cg_seed);
            for (const auto& e : rep.entries)
                std::cout << (e.pass ? "PASS" : "FAIL") << "  " << e.name
                          << "  max_rel_err=" << e.max_rel_err << '\n';
            std::cout << (rep.all_pass ? "gradient suite: all checks passed\n"
                                       : "gradient suite: FAILURES\n");
            return rep.all_pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
