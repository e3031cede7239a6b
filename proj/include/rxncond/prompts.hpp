#pragma once

// Instruction Q&A rendering: templates with the four placeholders
// <Corpus>, <Reaction SMILES>, <SMILES>, <Graph> (each exactly once).
// Corpus and reaction text are substituted at render time; the SMILES
// and graph placeholders stay in the question as sentinel tokens that
// the tokenizer maps to reserved ids.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rxncond/smiles.hpp"

namespace rxncond {

struct PromptTemplate {
    std::string id;
    std::string text;
};

// throws std::invalid_argument unless all four placeholders appear
// exactly once
void validate_template(const PromptTemplate& t);

// one template per line, '#' comments; ids are T00, T01, ... in file order
std::vector<PromptTemplate> load_templates(const std::string& path);
// the bundled 24-template bank (same content as data/templates.txt)
const std::vector<PromptTemplate>& builtin_templates();

struct InstructionExample {
    std::string id;
    std::string question;
    std::string answer;
    std::string reaction_smiles;
    std::string corpus;
    std::string template_id;
    uint64_t seed = 0;
    std::optional<std::array<std::string, kSlotCount>> slots;
};

InstructionExample render_prompt(const ReactionRecord& record, const PromptTemplate& t,
                                 uint64_t rng_seed);

// One (or `expand`) examples per record, template sampled uniformly with
// a per-record seed derived from (global seed, record id). Output order
// follows input order.
std::vector<InstructionExample> build_qa_dataset(const std::vector<ReactionRecord>& records,
                                                 const std::vector<PromptTemplate>& templates,
                                                 uint64_t seed, int expand = 1);

void write_examples_jsonl(const std::string& path, const std::vector<InstructionExample>& examples);
std::vector<InstructionExample> read_examples_jsonl(const std::string& path);

}  // namespace rxncond
