#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "rxncond/dataset.hpp"
#include "rxncond/rng.hpp"

using namespace rxncond;

namespace {
std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "rxncond_dataset_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}
}  // namespace

TEST_CASE("condition CSV loads five slots and maps empties to NONE") {
    const auto path = temp_file("cond.csv");
    {
        std::ofstream os(path);
        os << "id,rxn_smiles,catalyst,solvent1,solvent2,reagent1,reagent2,corpus\n";
        os << "r1,CC>>CO,[Zn],C1CCOC1,O,CO,[Cl-].[NH4+],\"a paragraph, quoted\"\n";
        os << "r2,CC>>CN,,C1CCOC1,,,,\n";
        os << "r3,not_a_reaction,,C,,,,\n";
    }
    LoadReport rep;
    auto records = load_condition_csv(path.string(), {}, &rep);
    REQUIRE(records.size() == 2);
    CHECK(rep.loaded == 2);
    CHECK(rep.skipped == 1);  // unparseable reaction skipped in lenient mode
    REQUIRE(records[0].slots.has_value());
    const auto& s0 = *records[0].slots;
    CHECK(s0[0] == "[Zn]");
    CHECK(s0[1] == "C1CCOC1");
    CHECK(s0[2] == "O");
    CHECK(s0[3] == "CO");
    CHECK(s0[4] == "[Cl-].[NH4+]");
    CHECK(records[0].corpus == "a paragraph, quoted");
    const auto& s1 = *records[1].slots;
    CHECK(s1[0] == "NONE");
    CHECK(s1[2] == "NONE");
    CHECK(s1[3] == "NONE");
    CHECK(s1[4] == "NONE");
}

TEST_CASE("strict mode aborts with the offending line number") {
    const auto path = temp_file("bad.csv");
    {
        std::ofstream os(path);
        os << "id,rxn_smiles,catalyst,solvent1,solvent2,reagent1,reagent2\n";
        os << "r1,broken,,,,,\n";
    }
    LoadOptions opts;
    opts.strict = true;
    try {
        load_condition_csv(path.string(), opts);
        FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("500mt CSV stores joined string and grouped species") {
    const auto path = temp_file("500mt.csv");
    {
        std::ofstream os(path);
        os << "id,rxn_smiles,conditions\n";
        os << "m1,CC>>CO,CO.[Na+].CC(=O)O.[BH3-]C#N\n";
        os << "m2,CC>>CN,[Na+].[OH-]\n";
    }
    auto records = load_500mt_csv(path.string(), ConditionGrouping::builtin_defaults(), {});
    REQUIRE(records.size() == 2);
    CHECK(*records[0].joined_conditions == "CO.[Na+].CC(=O)O.[BH3-]C#N");
    CHECK(records[0].condition_species.size() == 4);
    CHECK(records[1].condition_species.size() == 1);  // curated ion pair
    CHECK(records[1].condition_species[0] == "[Na+].[OH-]");
}

TEST_CASE("split sizes reproduce the full-roster partition") {
    auto s = split_indices(683410, 7);
    CHECK(s.train.size() == 546728);
    CHECK(s.valid.size() == 68341);
    CHECK(s.test.size() == 68341);
}

TEST_CASE("split of 10 records is 8/1/1, disjoint and exhaustive") {
    auto s = split_indices(10, 3);
    CHECK(s.train.size() == 8);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);
    std::set<size_t> all;
    for (auto v : s.train) all.insert(v);
    for (auto v : s.valid) all.insert(v);
    for (auto v : s.test) all.insert(v);
    CHECK(all.size() == 10);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 9);
}

TEST_CASE("same seed gives identical membership, different seeds differ") {
    auto a = split_indices(1000, 42);
    auto b = split_indices(1000, 42);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    auto c = split_indices(1000, 43);
    CHECK(a.train != c.train);
    CHECK_THROWS_AS(split_indices(9, 1), std::invalid_argument);
}

TEST_CASE("sparsity report on a hand-counted fixture") {
    std::vector<ReactionRecord> records;
    auto rec = [&](const char* cat, const char* s1, const char* s2, const char* r1,
                   const char* r2) {
        ReactionRecord r = make_record("x", "CC>>CO");
        r.slots = {{cat, s1, s2, r1, r2}};
        records.push_back(r);
    };
    rec("[Zn]", "O", "NONE", "CO", "NONE");
    rec("NONE", "O", "NONE", "NONE", "NONE");
    rec("NONE", "C1CCOC1", "O", "CO", "NONE");
    rec("[Pd]", "O", "NONE", "CO", "CC#N");
    auto rep = sparsity_report(records);
    CHECK(rep.total == 4);
    CHECK(rep.slots[0].non_empty == 2);  // catalyst
    CHECK(rep.slots[1].non_empty == 4);  // solvent1
    CHECK(rep.slots[2].non_empty == 1);  // solvent2
    CHECK(rep.slots[3].non_empty == 3);  // reagent1
    CHECK(rep.slots[4].non_empty == 1);  // reagent2
    CHECK(rep.slots[0].density == doctest::Approx(0.5));
    CHECK(rep.slots[1].density == doctest::Approx(1.0));
}

TEST_CASE("all-NONE sparsity is zero") {
    std::vector<ReactionRecord> records;
    ReactionRecord r = make_record("x", "CC>>CO");
    r.slots = {{"NONE", "NONE", "NONE", "NONE", "NONE"}};
    records.push_back(r);
    auto rep = sparsity_report(records);
    for (const auto& s : rep.slots) {
        CHECK(s.non_empty == 0);
        CHECK(s.density == 0.0);
    }
}

TEST_CASE("power-law fit recovers synthetic exponents") {
    for (double alpha_true : {2.0, 2.5}) {
        Rng rng(static_cast<uint64_t>(alpha_true * 1000));
        std::vector<double> samples;
        samples.reserve(10000);
        for (int i = 0; i < 10000; ++i) {
            double u = rng.uniform();
            while (u <= 0.0) u = rng.uniform();
            samples.push_back(std::pow(u, -1.0 / (alpha_true - 1.0)));
        }
        auto fit = power_law_fit(samples);
        INFO("alpha_true=", alpha_true, " alpha_hat=", fit.alpha, " xmin=", fit.xmin);
        CHECK(fit.alpha > alpha_true - 0.1);
        CHECK(fit.alpha < alpha_true + 0.1);
        CHECK(fit.ks < 0.05);
    }
}

TEST_CASE("power-law degenerate and undersized inputs are errors") {
    std::vector<double> equal(30, 5.0);
    CHECK_THROWS_AS(power_law_fit(equal), std::domain_error);
    std::vector<double> few = {1, 2, 3};
    CHECK_THROWS_AS(power_law_fit(few), std::invalid_argument);
}

TEST_CASE("vocab building: sizes, NONE reservation, frequency order") {
    std::vector<ReactionRecord> records;
    auto rec = [&](const char* cat) {
        ReactionRecord r = make_record("x", "CC>>CO");
        r.slots = {{cat, "O", "NONE", "NONE", "NONE"}};
        records.push_back(r);
    };
    rec("[Pd]");
    rec("[Pd]");
    rec("[Pd]");
    rec("[Zn]");
    rec("[Zn]");
    rec("[Fe]");
    auto [cond, tok] = build_vocabs(records);
    CHECK(cond.slot_size(0) == 4);  // NONE + 3 distinct catalysts
    CHECK(cond.label(0, 0) == "NONE");
    CHECK(cond.label(0, 1) == "[Pd]");  // most frequent first
    CHECK(cond.label(0, 2) == "[Zn]");
    CHECK(cond.label(0, 3) == "[Fe]");
    CHECK(cond.lookup(0, "[Pt]") == std::nullopt);  // unseen -> miss at eval
    CHECK(*cond.lookup(1, "O") == 1);
    // shared token vocab picked up the reaction tokens
    CHECK(tok.contains("C"));
    CHECK(tok.contains("O"));
    CHECK(tok.id("<nonexistent-token>") == TokenVocab::kUnk);
}

TEST_CASE("token vocab specials have pinned ids") {
    TokenVocab tok;
    CHECK(TokenVocab::kPad == 0);
    CHECK(TokenVocab::kBos == 1);
    CHECK(TokenVocab::kEos == 2);
    CHECK(TokenVocab::kDot == 3);
    CHECK(tok.id(".") == TokenVocab::kDot);
    CHECK(tok.token(0) == "<PAD>");
}

TEST_CASE("token vocab encode/decode answers round-trip") {
    TokenVocab tok;
    tok.add_reaction_tokens("CO.[Na+].CC(=O)O");
    auto ids = tok.encode_answer("CO.[Na+]");
    REQUIRE(ids.size() == 5);  // C O . [Na+] EOS
    CHECK(ids.back() == TokenVocab::kEos);
    CHECK(tok.decode(ids) == "CO.[Na+]");
}

TEST_CASE("question encoding handles sentinels words and reactions") {
    TokenVocab tok;
    tok.add_reaction_tokens("CC>>CO");
    tok.add_question_tokens("Predict conditions for CC>>CO given <SMILES> <Graph>");
    auto ids = tok.encode_question("Predict conditions for CC>>CO given <SMILES> <Graph>");
    // one sentinel of each kind survives encoding
    CHECK(std::count(ids.begin(), ids.end(), TokenVocab::kSentSmiles) == 1);
    CHECK(std::count(ids.begin(), ids.end(), TokenVocab::kSentGraph) == 1);
    CHECK(std::count(ids.begin(), ids.end(), TokenVocab::kArrow) == 1);
    CHECK(std::count(ids.begin(), ids.end(), TokenVocab::kUnk) == 0);
    // unseen word maps to UNK
    auto ids2 = tok.encode_question("zzzunknownword");
    REQUIRE(ids2.size() == 1);
    CHECK(ids2[0] == TokenVocab::kUnk);
}

TEST_CASE("species frequencies cover both flavors") {
    std::vector<ReactionRecord> records;
    ReactionRecord a = make_record("a", "CC>>CO");
    a.slots = {{"[Pd]", "O", "NONE", "NONE", "NONE"}};
    ReactionRecord b = make_record("b", "CC>>CN");
    b.joined_conditions = "CO.[Na+]";
    b.condition_species = {"CO", "[Na+]"};
    records.push_back(a);
    records.push_back(b);
    auto freq = species_frequencies(records);
    CHECK(freq.at("[Pd]") == 1);
    CHECK(freq.at("O") == 1);
    CHECK(freq.at("CO") == 1);
    CHECK(freq.count("NONE") == 0);
}
