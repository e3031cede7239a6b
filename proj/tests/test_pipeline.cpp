#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "rxncond/metrics.hpp"
#include "rxncond/prompts.hpp"
#include "rxncond/retrieval.hpp"
#include "rxncond/rng.hpp"
#include "rxncond/vocab.hpp"

using namespace rxncond;

namespace {
std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "rxncond_pipeline_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ReactionRecord slot_record(const std::string& id, const std::string& rxn, const char* cat) {
    ReactionRecord r = make_record(id, rxn);
    r.slots = {{cat, "O", "NONE", "CO", "NONE"}};
    r.corpus = "To a solution of the substrate was added the reagent at 0 C.";
    return r;
}
}  // namespace

// ------------------------------------------------------------- prompts

TEST_CASE("template validation requires each placeholder exactly once") {
    PromptTemplate ok{"T0",
                      "<Corpus> react <Reaction SMILES> with <SMILES> and <Graph> please."};
    validate_template(ok);
    PromptTemplate missing{"T1", "<Corpus> <Reaction SMILES> <SMILES> only"};
    CHECK_THROWS_AS(validate_template(missing), std::invalid_argument);
    PromptTemplate doubled{"T2",
                           "<Corpus> <Corpus> <Reaction SMILES> <SMILES> <Graph>"};
    CHECK_THROWS_AS(validate_template(doubled), std::invalid_argument);
}

TEST_CASE("builtin template bank has 24 valid templates") {
    const auto& bank = builtin_templates();
    CHECK(bank.size() == 24);
    for (const auto& t : bank) validate_template(t);
    std::set<std::string> ids;
    for (const auto& t : bank) CHECK(ids.insert(t.id).second);
}

TEST_CASE("shipped template file matches the builtin bank") {
    const auto path = std::filesystem::path(PROJECT_SOURCE_DIR) / "data" / "templates.txt";
    REQUIRE(std::filesystem::exists(path));
    const auto bank = load_templates(path.string());
    const auto& builtin = builtin_templates();
    REQUIRE(bank.size() == builtin.size());
    for (size_t i = 0; i < bank.size(); ++i) CHECK(bank[i].text == builtin[i].text);
}

TEST_CASE("render substitutes corpus and reaction, keeps sentinels") {
    auto rec = slot_record("r7", "CC(C)O.O=C(n1ccnc1)n1ccnc1>>CC(C)OC(=O)n1ccnc1", "[Zn]");
    PromptTemplate t{"T0",
                     "<Corpus> Predict conditions for <Reaction SMILES> given <SMILES> <Graph>"};
    auto ex = render_prompt(rec, t, 99);
    CHECK(ex.question.find(rec.raw) != std::string::npos);
    CHECK(ex.question.find(rec.corpus) != std::string::npos);
    CHECK(ex.question.find("<SMILES>") != std::string::npos);
    CHECK(ex.question.find("<Graph>") != std::string::npos);
    CHECK(ex.question.find("<Corpus>") == std::string::npos);
    CHECK(ex.question.find("<Reaction SMILES>") == std::string::npos);
    CHECK(ex.answer == "[Zn],O,NONE,CO,NONE");
    REQUIRE(ex.slots.has_value());
    CHECK((*ex.slots)[0] == "[Zn]");

    // empty corpus still renders a valid question
    rec.corpus.clear();
    auto ex2 = render_prompt(rec, t, 99);
    CHECK(ex2.question.find("<SMILES>") != std::string::npos);
    // identical inputs and seed give identical examples
    auto ex3 = render_prompt(rec, t, 99);
    CHECK(ex2.question == ex3.question);
    CHECK(ex2.answer == ex3.answer);
}

TEST_CASE("generation flavor answer is the joined condition string") {
    ReactionRecord rec = make_record("g1", "CC>>CO");
    rec.joined_conditions = "Cl.ClCCl";
    rec.condition_species = {"Cl", "ClCCl"};
    auto ex = render_prompt(rec, builtin_templates()[0], 1);
    CHECK(ex.answer == "Cl.ClCCl");
    CHECK(!ex.slots.has_value());
}

TEST_CASE("placeholder conservation: every rendered question has one sentinel of each kind") {
    Rng rng(8);
    std::vector<ReactionRecord> records;
    for (int i = 0; i < 30; ++i)
        records.push_back(slot_record("r" + std::to_string(i), "CC>>CO", "[Pd]"));
    auto examples = build_qa_dataset(records, builtin_templates(), 5);
    REQUIRE(examples.size() == records.size());
    TokenVocab vocab;
    for (const auto& ex : examples) {
        size_t smiles_count = 0, graph_count = 0, pos = 0;
        while ((pos = ex.question.find("<SMILES>", pos)) != std::string::npos) {
            ++smiles_count;
            pos += 8;
        }
        pos = 0;
        while ((pos = ex.question.find("<Graph>", pos)) != std::string::npos) {
            ++graph_count;
            pos += 7;
        }
        CHECK(smiles_count == 1);
        CHECK(graph_count == 1);
        // sentinels survive tokenization as reserved ids
        vocab.add_question_tokens(ex.question);
        auto ids = vocab.encode_question(ex.question);
        CHECK(std::count(ids.begin(), ids.end(), TokenVocab::kSentSmiles) == 1);
        CHECK(std::count(ids.begin(), ids.end(), TokenVocab::kSentGraph) == 1);
    }
}

TEST_CASE("qa dataset: single template always used; seeded template choice reproducible") {
    std::vector<ReactionRecord> records;
    for (int i = 0; i < 20; ++i)
        records.push_back(slot_record("r" + std::to_string(i), "CC>>CO", "[Pd]"));
    std::vector<PromptTemplate> one = {builtin_templates()[3]};
    auto ex1 = build_qa_dataset(records, one, 7);
    for (const auto& e : ex1) CHECK(e.template_id == one[0].id);

    auto a = build_qa_dataset(records, builtin_templates(), 7);
    auto b = build_qa_dataset(records, builtin_templates(), 7);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].template_id == b[i].template_id);
    std::set<std::string> used;
    for (const auto& e : a) used.insert(e.template_id);
    CHECK(used.size() > 1);  // 20 records across 24 templates should vary

    CHECK_THROWS_AS(build_qa_dataset(records, {}, 7), std::invalid_argument);

    // expansion factor multiplies examples per record, order preserved
    auto expanded = build_qa_dataset(records, builtin_templates(), 7, 3);
    CHECK(expanded.size() == records.size() * 3);
    CHECK(expanded[0].id == "r0#0");
    CHECK(expanded[2].id == "r0#2");
    CHECK(expanded[3].id == "r1#0");
}

TEST_CASE("instruction JSONL round-trips") {
    std::vector<ReactionRecord> records = {slot_record("ra", "CC>>CO", "[Zn]")};
    ReactionRecord gen = make_record("rb", "CC>>CN");
    gen.joined_conditions = "CO.[Na+]";
    records.push_back(gen);
    auto examples = build_qa_dataset(records, builtin_templates(), 11);
    const auto path = temp_file("examples.jsonl");
    write_examples_jsonl(path.string(), examples);
    auto back = read_examples_jsonl(path.string());
    REQUIRE(back.size() == examples.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == examples[i].id);
        CHECK(back[i].question == examples[i].question);
        CHECK(back[i].answer == examples[i].answer);
        CHECK(back[i].slots.has_value() == examples[i].slots.has_value());
    }
    // file is newline-terminated one-object-per-line JSON
    std::ifstream is(path);
    std::string line;
    size_t lines = 0;
    while (std::getline(is, line)) {
        ++lines;
        CHECK(line.front() == '{');
        CHECK(line.back() == '}');
    }
    CHECK(lines == examples.size());
}

// ----------------------------------------------------------- retrieval

TEST_CASE("identical reactions produce identical fingerprints") {
    auto a = fingerprint_reaction("CC(C)O.CCN>>CC(C)OC");
    auto b = fingerprint_reaction("CC(C)O.CCN>>CC(C)OC");
    CHECK(a.counts == b.counts);
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0));
}

TEST_CASE("disjoint token sets have near-zero similarity") {
    // disjoint alphabets: halide ions vs aromatic ring
    auto a = fingerprint_reaction("[Cl-].[Br-]>>[I-]");
    auto b = fingerprint_reaction("c1ccccc1>>C1CCCCC1");
    CHECK(cosine_similarity(a, b) < 0.05);
    // empty-vs-any convention
    Fingerprint empty;
    empty.counts.assign(kFingerprintWidth, 0.0f);
    CHECK(cosine_similarity(empty, b) == 0.0);
}

TEST_CASE("retrieval ranks an identical reaction first and excludes own corpus") {
    CorpusIndex index;
    index.add({"CC(C)O>>CC=O", "oxidation paragraph"});
    index.add({"c1ccccc1>>c1ccccc1Br", "bromination paragraph"});
    index.add({"CCO.CC(=O)O>>CCOC(C)=O", "ester paragraph"});
    ReactionRecord q = make_record("q", "CCO.CC(=O)O>>CCOC(C)=O");
    auto hits = index.retrieve_similar(q, 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].corpus == "ester paragraph");
    CHECK(hits[0].score == doctest::Approx(1.0));
    CHECK(hits[0].score >= hits[1].score);

    // the record's own paired corpus is excluded
    q.corpus = "ester paragraph";
    auto excl = index.retrieve_similar(q, 3);
    for (const auto& h : excl) CHECK(h.corpus != "ester paragraph");

    // k = 0 empty; k > pool returns the full pool
    CHECK(index.retrieve_similar(q, 0).empty());
    q.corpus.clear();
    CHECK(index.retrieve_similar(q, 50).size() == 3);
}

TEST_CASE("retrieval equals brute-force similarity sort on a random pool") {
    Rng rng(55);
    static const char* frags[] = {"CC", "CCO", "c1ccccc1", "CC(C)O", "CCN", "C=O", "CC#N", "CBr"};
    CorpusIndex index;
    std::vector<std::string> pool_reactions;
    for (int i = 0; i < 50; ++i) {
        std::string lhs = frags[rng.index(8)];
        if (rng.uniform() < 0.5) lhs += "." + std::string(frags[rng.index(8)]);
        std::string rxn = lhs + ">>" + frags[rng.index(8)];
        pool_reactions.push_back(rxn);
        index.add({rxn, "corpus " + std::to_string(i)});
    }
    ReactionRecord q = make_record("q", "CC.CCO>>CC(C)O");
    auto hits = index.retrieve_similar(q, 50);
    // brute force oracle
    const auto qfp = fingerprint(q);
    std::vector<std::pair<double, size_t>> oracle;
    for (size_t i = 0; i < pool_reactions.size(); ++i)
        oracle.push_back({cosine_similarity(qfp, fingerprint_reaction(pool_reactions[i])), i});
    std::stable_sort(oracle.begin(), oracle.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    REQUIRE(hits.size() == oracle.size());
    for (size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].pool_index == oracle[i].second);
        CHECK(hits[i].score == doctest::Approx(oracle[i].first));
        CHECK(hits[i].score >= 0.0);
        CHECK(hits[i].score <= 1.0 + 1e-12);
    }
    // determinism
    auto again = index.retrieve_similar(q, 50);
    for (size_t i = 0; i < hits.size(); ++i) CHECK(again[i].pool_index == hits[i].pool_index);
}

TEST_CASE("corpus pool JSONL loading") {
    const auto path = temp_file("pool.jsonl");
    {
        std::ofstream os(path);
        os << R"({"reaction_smiles":"CC>>CO","corpus":"p1"})" << '\n';
        os << R"({"reaction_smiles":"CC>>CN","corpus":"p2"})" << '\n';
    }
    auto index = CorpusIndex::from_jsonl(path.string());
    CHECK(index.size() == 2);
    CHECK(index.entry(1).corpus == "p2");
}

// ------------------------------------------------------------- metrics

TEST_CASE("strict top-k on hand cases") {
    std::vector<std::array<std::vector<std::string>, kSlotCount>> preds(1);
    std::vector<std::array<std::string, kSlotCount>> truths(1);
    for (int s = 0; s < kSlotCount; ++s) {
        preds[0][static_cast<size_t>(s)] = {"a", "b", "c", "d", "e"};
        truths[0][static_cast<size_t>(s)] = "a";
    }
    truths[0][1] = "b";  // truth at rank 2 for slot 1
    auto acc = topk_strict(preds, truths, {1, 3, 5});
    CHECK(acc[0].at(1) == 1.0);
    CHECK(acc[0].at(3) == 1.0);
    CHECK(acc[0].at(5) == 1.0);
    CHECK(acc[1].at(1) == 0.0);
    CHECK(acc[1].at(3) == 1.0);
}

TEST_CASE("strict top-k equals brute force on 1000 random cases") {
    Rng rng(77);
    const std::vector<int> ks = {1, 3, 5};
    std::vector<std::array<std::vector<std::string>, kSlotCount>> preds;
    std::vector<std::array<std::string, kSlotCount>> truths;
    const int label_pool = 12;
    for (int r = 0; r < 1000; ++r) {
        std::array<std::vector<std::string>, kSlotCount> p;
        std::array<std::string, kSlotCount> t;
        for (int s = 0; s < kSlotCount; ++s) {
            std::vector<int> order(label_pool);
            for (int i = 0; i < label_pool; ++i) order[static_cast<size_t>(i)] = i;
            rng.shuffle(order);
            for (int i = 0; i < 6; ++i)
                p[static_cast<size_t>(s)].push_back("L" + std::to_string(order[static_cast<size_t>(i)]));
            t[static_cast<size_t>(s)] = "L" + std::to_string(rng.index(label_pool));
        }
        preds.push_back(std::move(p));
        truths.push_back(std::move(t));
    }
    auto acc = topk_strict(preds, truths, ks);
    // brute force recount
    for (int s = 0; s < kSlotCount; ++s) {
        for (int k : ks) {
            size_t hits = 0;
            for (size_t r = 0; r < truths.size(); ++r) {
                const auto& ranked = preds[r][static_cast<size_t>(s)];
                for (int i = 0; i < k; ++i)
                    if (ranked[static_cast<size_t>(i)] == truths[r][static_cast<size_t>(s)]) {
                        ++hits;
                        break;
                    }
            }
            CHECK(acc[static_cast<size_t>(s)].at(k) ==
                  doctest::Approx(static_cast<double>(hits) / 1000.0));
        }
    }
    // monotone in k
    for (int s = 0; s < kSlotCount; ++s) {
        CHECK(acc[static_cast<size_t>(s)].at(1) <= acc[static_cast<size_t>(s)].at(3));
        CHECK(acc[static_cast<size_t>(s)].at(3) <= acc[static_cast<size_t>(s)].at(5));
    }
}

TEST_CASE("sequence top-k is order-free over species multisets") {
    auto g = ConditionGrouping::builtin_defaults();
    std::vector<std::vector<std::string>> cands = {{"CC(=O)O.CO", "CO"}};
    std::vector<std::string> truths = {"CO.CC(=O)O"};
    auto acc = topk_sequence(cands, truths, {1, 3}, g);
    CHECK(acc.at(1) == 1.0);  // order-free hit
    // a missing species is a miss
    cands = {{"CC(=O)O"}};
    acc = topk_sequence(cands, truths, {1}, g);
    CHECK(acc.at(1) == 0.0);
    // multiset: duplicated species must match exactly
    cands = {{"CO.CO"}};
    truths = {"CO"};
    acc = topk_sequence(cands, truths, {1}, g);
    CHECK(acc.at(1) == 0.0);
}

TEST_CASE("sequence top-k equals brute force on random cases") {
    Rng rng(99);
    auto g = ConditionGrouping::builtin_defaults();
    static const char* pool[] = {"CO", "CCO", "[Na+].[OH-]", "O", "CC(=O)O", "[Cl-].[NH4+]"};
    const std::vector<int> ks = {1, 3, 5};
    std::vector<std::vector<std::string>> cands;
    std::vector<std::string> truths;
    auto random_joined = [&](int max_species) {
        const int n = 1 + rng.index(static_cast<size_t>(max_species));
        std::string s;
        for (int i = 0; i < n; ++i) {
            if (i) s += '.';
            s += pool[rng.index(6)];
        }
        return s;
    };
    for (int r = 0; r < 1000; ++r) {
        std::vector<std::string> c;
        for (int i = 0; i < 5; ++i) c.push_back(random_joined(3));
        cands.push_back(std::move(c));
        truths.push_back(random_joined(3));
    }
    auto acc = topk_sequence(cands, truths, ks, g);
    for (int k : ks) {
        size_t hits = 0;
        for (size_t r = 0; r < truths.size(); ++r) {
            auto ts = g.split(truths[r]);
            std::sort(ts.begin(), ts.end());
            bool hit = false;
            for (int i = 0; i < k && i < static_cast<int>(cands[r].size()); ++i) {
                auto cs = g.split(cands[r][static_cast<size_t>(i)]);
                std::sort(cs.begin(), cs.end());
                if (cs == ts) hit = true;
            }
            if (hit) ++hits;
        }
        CHECK(acc.at(k) == doctest::Approx(static_cast<double>(hits) / 1000.0));
    }
    CHECK(acc.at(1) <= acc.at(3));
    CHECK(acc.at(3) <= acc.at(5));
}

TEST_CASE("partial match membership rule") {
    auto g = ConditionGrouping::builtin_defaults();
    const std::vector<std::string> truth = {"CO", "[Na+]", "CC(=O)O"};
    CHECK(partial_match("CO", truth, g));
    CHECK(!partial_match("CCO", truth, g));
    CHECK(partial_match("CO.[Na+]", truth, g));
    CHECK(!partial_match("CO.CCO", truth, g));
    // empty prediction matches only empty truth
    CHECK(!partial_match("", truth, g));
    CHECK(partial_match("", {}, g));
    // lenient mode ignores predicted species from the common list
    const std::vector<std::string> common = {"CCO"};
    CHECK(partial_match("CO.CCO", truth, g, &common));
    CHECK(!partial_match("CO.CBr", truth, g, &common));
}

TEST_CASE("report emission and CSV round trip") {
    MetricReport rep;
    rep.model = "toy";
    rep.record_count = 3;
    rep.accuracy["catalyst"] = {{1, 0.5}, {3, 0.75}};
    rep.accuracy["sequence"] = {{1, 0.25}};
    rep.notes["overall_top1"] = "mean of the five per-slot top-1 accuracies (local definition)";
    const auto jpath = temp_file("report.json");
    const auto cpath = temp_file("report.csv");
    emit_report(rep, jpath.string(), cpath.string());
    auto rows = read_report_csv(cpath.string());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].series == "catalyst");
    CHECK(rows[0].k == 1);
    CHECK(rows[0].accuracy == 0.5);
    CHECK(rows[2].series == "sequence");
    // JSON agrees with CSV numbers
    std::ifstream is(jpath);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"top1\": 0.5") != std::string::npos);
    CHECK(text.find("\"top3\": 0.75") != std::string::npos);

    // empty report yields a header-only CSV
    MetricReport empty;
    empty.model = "empty";
    emit_report(empty, temp_file("e.json").string(), temp_file("e.csv").string());
    CHECK(read_report_csv(temp_file("e.csv").string()).empty());
}

TEST_CASE("overall top-1 is the slot mean") {
    std::array<std::map<int, double>, kSlotCount> acc;
    for (int s = 0; s < kSlotCount; ++s) acc[static_cast<size_t>(s)][1] = 0.2 * (s + 1);
    CHECK(overall_top1(acc) == doctest::Approx(0.6));
}

TEST_CASE("a sequence hit at k=1 implies a partial match") {
    Rng rng(404);
    auto g = ConditionGrouping::builtin_defaults();
    static const char* pool[] = {"CO", "CCO", "[Na+].[OH-]", "O", "CC(=O)O"};
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + rng.index(3);
        std::string joined;
        for (int i = 0; i < n; ++i) {
            if (i) joined += '.';
            joined += pool[rng.index(5)];
        }
        // candidate identical up to species order
        auto species = g.split(joined);
        rng.shuffle(species);
        std::string candidate;
        for (size_t i = 0; i < species.size(); ++i) {
            if (i) candidate += '.';
            candidate += species[i];
        }
        const auto hit = topk_sequence({{candidate}}, {joined}, {1}, g);
        REQUIRE(hit.at(1) == 1.0);
        CHECK(partial_match(candidate, g.split(joined), g));
    }
}

TEST_CASE("metrics are invariant under record order") {
    Rng rng(505);
    auto g = ConditionGrouping::builtin_defaults();
    std::vector<std::array<std::vector<std::string>, kSlotCount>> preds;
    std::vector<std::array<std::string, kSlotCount>> truths;
    std::vector<std::vector<std::string>> cands;
    std::vector<std::string> seq_truths;
    static const char* pool[] = {"CO", "CCO", "O", "CC(=O)O"};
    for (int r = 0; r < 60; ++r) {
        std::array<std::vector<std::string>, kSlotCount> p;
        std::array<std::string, kSlotCount> t;
        for (int s = 0; s < kSlotCount; ++s) {
            for (int i = 0; i < 3; ++i) p[static_cast<size_t>(s)].push_back(pool[rng.index(4)]);
            t[static_cast<size_t>(s)] = pool[rng.index(4)];
        }
        preds.push_back(p);
        truths.push_back(t);
        cands.push_back({pool[rng.index(4)], pool[rng.index(4)]});
        seq_truths.push_back(pool[rng.index(4)]);
    }
    const auto base_strict = topk_strict(preds, truths, {1, 3});
    const auto base_seq = topk_sequence(cands, seq_truths, {1, 2}, g);
    std::vector<size_t> order(preds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    decltype(preds) preds2;
    decltype(truths) truths2;
    decltype(cands) cands2;
    decltype(seq_truths) seq_truths2;
    for (size_t i : order) {
        preds2.push_back(preds[i]);
        truths2.push_back(truths[i]);
        cands2.push_back(cands[i]);
        seq_truths2.push_back(seq_truths[i]);
    }
    CHECK(topk_strict(preds2, truths2, {1, 3}) == base_strict);
    CHECK(topk_sequence(cands2, seq_truths2, {1, 2}, g) == base_seq);
}
