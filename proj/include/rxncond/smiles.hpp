#pragma once

// SMILES tokenizer and molecular graph parser for the organic subset:
// atoms B C N O P S F Cl Br I (+ aromatic lowercase and wildcard *),
// bracket atoms with isotope/charge/H-count, bonds - = # : and stereo
// markers / \ (preserved in token text, treated as single bonds in the
// graph), ring closures including %nn, branches, and dot-separated
// components. No valence checking, no canonicalization.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rxncond {

struct SmilesError : std::runtime_error {
    SmilesError(const std::string& msg, size_t position)
        : std::runtime_error(msg + " (at byte " + std::to_string(position) + ")"),
          position(position) {}
    size_t position;
};

enum class TokKind { Atom, BracketAtom, Bond, RingBond, BranchOpen, BranchClose, Dot };

struct SmilesToken {
    TokKind kind;
    std::string text;  // original substring; concatenating all tokens reproduces the input
    size_t position;
};

std::vector<SmilesToken> tokenize_smiles(const std::string& s);

enum class BondOrder { Single, Double, Triple, Aromatic };

struct Atom {
    std::string element;
    bool aromatic = false;
    int charge = 0;
    int explicit_h = 0;  // from bracket H-count; 0 when unspecified
};

struct Bond {
    int i = 0;
    int j = 0;
    BondOrder order = BondOrder::Single;
};

struct Molecule {
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;
};

// Dots inside the string yield disconnected components within one Molecule.
Molecule parse_molecule(const std::string& s);

// Splits "reactants>>products" into top-level dot-separated component
// strings. Exactly one ">>" is required, both sides non-empty.
std::pair<std::vector<std::string>, std::vector<std::string>> split_reaction(const std::string& s);

// Curated multi-fragment species ("[Na+].[OH-]" is one reagent). Loaded
// from a text file with one dot-joined group per line, '#' comments.
class ConditionGrouping {
public:
    ConditionGrouping() = default;
    void add_group(const std::string& dot_joined);
    static ConditionGrouping from_file(const std::string& path);
    static ConditionGrouping builtin_defaults();

    // Splits on top-level dots, then re-merges adjacent fragments that
    // form a curated group (in any fragment order); merged species take
    // the group's canonical text so later comparisons are stable.
    std::vector<std::string> split(const std::string& joined) const;

    size_t size() const { return groups_.size(); }

private:
    struct Group {
        std::vector<std::string> fragments;  // sorted for matching
        std::string canonical;               // as written in the file
    };
    std::vector<Group> groups_;  // kept sorted by descending fragment count
};

inline std::vector<std::string> split_condition_string(const std::string& s,
                                                       const ConditionGrouping& grouping) {
    return grouping.split(s);
}

// Condition slot order used throughout: catalyst, solvent1, solvent2,
// reagent1, reagent2.
inline constexpr int kSlotCount = 5;
inline constexpr std::array<const char*, kSlotCount> kSlotNames = {
    "catalyst", "solvent1", "solvent2", "reagent1", "reagent2"};
inline constexpr const char* kNoneLabel = "NONE";

// One reaction with its condition labels. Exactly one of `slots`
// (classification flavor) or `joined_conditions` (generation flavor) is
// populated.
struct ReactionRecord {
    std::string id;
    std::string raw;  // full reaction SMILES
    std::vector<std::string> reactants;
    std::vector<std::string> products;
    std::optional<std::array<std::string, kSlotCount>> slots;
    std::optional<std::string> joined_conditions;
    std::vector<std::string> condition_species;  // grouped split of joined_conditions
    std::string corpus;                          // empty when absent
};

// Builds a record from a reaction string, validating the reaction split.
ReactionRecord make_record(std::string id, const std::string& reaction_smiles);

}  // namespace rxncond
