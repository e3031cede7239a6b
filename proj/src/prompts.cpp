#include "rxncond/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rxncond/rng.hpp"
#include "rxncond/vocab.hpp"

namespace rxncond {

namespace {

constexpr const char* kPlaceholders[4] = {"<Corpus>", "<Reaction SMILES>", "<SMILES>", "<Graph>"};

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::string replace_once(std::string text, const std::string& needle, const std::string& value) {
    const size_t pos = text.find(needle);
    text.replace(pos, needle.size(), value);
    return text;
}

}  // namespace

void validate_template(const PromptTemplate& t) {
    for (const char* ph : kPlaceholders) {
        const size_t n = count_occurrences(t.text, ph);
        if (n != 1)
            throw std::invalid_argument("template " + t.id + ": placeholder " + ph + " appears " +
                                        std::to_string(n) + " times (need exactly 1)");
    }
}

std::vector<PromptTemplate> load_templates(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open template file: " + path);
    std::vector<PromptTemplate> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] == '#') continue;
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        if (line.empty()) continue;
        char idbuf[8];
        std::snprintf(idbuf, sizeof idbuf, "T%02zu", out.size());
        PromptTemplate t{idbuf, line};
        validate_template(t);
        out.push_back(std::move(t));
    }
    if (out.empty()) throw std::runtime_error("template file has no templates: " + path);
    return out;
}

const std::vector<PromptTemplate>& builtin_templates() {
    static const std::vector<PromptTemplate> bank = [] {
        const char* texts[] = {
            "<Corpus> Given the reaction <Reaction SMILES> with reaction embeddings <SMILES> and "
            "graph embeddings <Graph> , please recommend the reaction conditions.",
            "<Corpus> Here is a reaction: <Reaction SMILES> . Using <SMILES> and <Graph> , what "
            "conditions should be used to run it?",
            "<Corpus> For the transformation <Reaction SMILES> , consider the representations "
            "<SMILES> <Graph> and predict the optimal conditions.",
            "<Corpus> Please suggest suitable reaction conditions for <Reaction SMILES> . Reaction "
            "features: <SMILES> , graph features: <Graph> .",
            "<Corpus> Which conditions enable the reaction <Reaction SMILES> ? Context tokens: "
            "<SMILES> and <Graph> .",
            "<Corpus> Based on <SMILES> and <Graph> , recommend a catalyst, solvents and reagents "
            "for <Reaction SMILES> .",
            "<Corpus> The reaction of interest is <Reaction SMILES> . With embeddings <SMILES> "
            "<Graph> , list the required conditions.",
            "<Corpus> Recommend conditions for carrying out <Reaction SMILES> given the fused "
            "reaction representation <SMILES> and the molecular graph representation <Graph> .",
            "<Corpus> What reaction conditions would you propose for <Reaction SMILES> ? Modal "
            "inputs: <SMILES> , <Graph> .",
            "<Corpus> Consider <Reaction SMILES> together with <SMILES> and <Graph> and name the "
            "conditions that make it work.",
            "<Corpus> Given reaction <Reaction SMILES> , SMILES tokens <SMILES> and graph tokens "
            "<Graph> , which chemical context is appropriate?",
            "<Corpus> Predict the conditions for this reaction: <Reaction SMILES> using the "
            "encoded reaction <SMILES> and its graph <Graph> .",
            "<Corpus> Suggest the chemical conditions needed for <Reaction SMILES> . Auxiliary "
            "representations: <SMILES> and <Graph> .",
            "<Corpus> With the reaction <Reaction SMILES> encoded as <SMILES> and structured as "
            "<Graph> , which conditions do you recommend?",
            "<Corpus> Identify appropriate reaction conditions for <Reaction SMILES> , taking "
            "into account <SMILES> and <Graph> .",
            "<Corpus> For reaction <Reaction SMILES> please predict the optimal conditions ; the "
            "reaction tokens are <SMILES> and the graph tokens are <Graph> .",
            "<Corpus> How should one run the reaction <Reaction SMILES> ? Embeddings: <SMILES> ; "
            "topology: <Graph> .",
            "<Corpus> Propose reaction conditions for <Reaction SMILES> . The multimodal context "
            "is given by <SMILES> and <Graph> .",
            "<Corpus> Under what conditions does <Reaction SMILES> proceed? Reference "
            "representations <SMILES> and <Graph> .",
            "<Corpus> Choose conditions for the following reaction: <Reaction SMILES> . Reaction "
            "representation <SMILES> , graph representation <Graph> .",
            "<Corpus> Please recommend a chemical context for <Reaction SMILES> based on the "
            "tokens <SMILES> and <Graph> .",
            "<Corpus> Looking at <Reaction SMILES> with features <SMILES> and <Graph> , what "
            "conditions are required?",
            "<Corpus> Determine the reaction conditions for <Reaction SMILES> from the reaction "
            "embedding <SMILES> and the graph embedding <Graph> .",
            "<Corpus> Given the multimodal description <SMILES> <Graph> of the reaction "
            "<Reaction SMILES> , recommend the conditions to use.",
        };
        std::vector<PromptTemplate> v;
        for (size_t i = 0; i < sizeof(texts) / sizeof(texts[0]); ++i) {
            char idbuf[8];
            std::snprintf(idbuf, sizeof idbuf, "T%02zu", i);
            v.push_back({idbuf, texts[i]});
            validate_template(v.back());
        }
        return v;
    }();
    return bank;
}

InstructionExample render_prompt(const ReactionRecord& record, const PromptTemplate& t,
                                 uint64_t rng_seed) {
    validate_template(t);
    if (!record.slots && !record.joined_conditions)
        throw std::invalid_argument("record " + record.id + " carries no condition labels");

    InstructionExample ex;
    ex.id = record.id;
    ex.reaction_smiles = record.raw;
    ex.corpus = record.corpus;
    ex.template_id = t.id;
    ex.seed = rng_seed;

    std::string q = t.text;
    q = replace_once(q, "<Corpus>", record.corpus);
    q = replace_once(q, "<Reaction SMILES>", record.raw);
    ex.question = q;  // <SMILES> and <Graph> stay as sentinels

    if (record.joined_conditions) {
        ex.answer = *record.joined_conditions;
    } else {
        ex.slots = record.slots;
        std::string joined;
        for (int s = 0; s < kSlotCount; ++s) {
            if (s) joined += ',';
            joined += (*record.slots)[static_cast<size_t>(s)];
        }
        ex.answer = joined;
    }
    if (ex.answer.empty()) throw std::invalid_argument("record " + record.id + ": empty answer");
    return ex;
}

std::vector<InstructionExample> build_qa_dataset(const std::vector<ReactionRecord>& records,
                                                 const std::vector<PromptTemplate>& templates,
                                                 uint64_t seed, int expand) {
    if (templates.empty()) throw std::invalid_argument("template bank is empty");
    if (expand < 1) throw std::invalid_argument("expansion factor must be >= 1");
    std::vector<InstructionExample> out;
    out.reserve(records.size() * static_cast<size_t>(expand));
    for (const auto& record : records) {
        const uint64_t record_seed = mix_seed(seed, fnv1a64(record.id));
        for (int k = 0; k < expand; ++k) {
            const uint64_t draw_seed = mix_seed(record_seed, static_cast<uint64_t>(k));
            Rng rng(draw_seed);
            const auto& t = templates[rng.below(templates.size())];
            InstructionExample ex = render_prompt(record, t, draw_seed);
            if (expand > 1) ex.id += "#" + std::to_string(k);
            out.push_back(std::move(ex));
        }
    }
    return out;
}

void write_examples_jsonl(const std::string& path,
                          const std::vector<InstructionExample>& examples) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& ex : examples) {
        nlohmann::ordered_json j;
        j["id"] = ex.id;
        j["question"] = ex.question;
        j["answer"] = ex.answer;
        j["reaction_smiles"] = ex.reaction_smiles;
        j["corpus"] = ex.corpus;
        j["template_id"] = ex.template_id;
        if (ex.slots) {
            nlohmann::ordered_json slots;
            for (int s = 0; s < kSlotCount; ++s)
                slots[kSlotNames[static_cast<size_t>(s)]] = (*ex.slots)[static_cast<size_t>(s)];
            j["slots"] = slots;
        }
        os << j.dump() << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<InstructionExample> read_examples_jsonl(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<InstructionExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        InstructionExample ex;
        ex.id = j.at("id").get<std::string>();
        ex.question = j.at("question").get<std::string>();
        ex.answer = j.at("answer").get<std::string>();
        ex.reaction_smiles = j.at("reaction_smiles").get<std::string>();
        ex.corpus = j.value("corpus", "");
        ex.template_id = j.value("template_id", "");
        if (j.contains("slots")) {
            std::array<std::string, kSlotCount> slots;
            for (int s = 0; s < kSlotCount; ++s)
                slots[static_cast<size_t>(s)] =
                    j["slots"].at(kSlotNames[static_cast<size_t>(s)]).get<std::string>();
            ex.slots = slots;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace rxncond
