#include "rxncond/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

namespace rxncond {

namespace {

bool is_organic_upper_start(char c) {
    switch (c) {
        case 'B': case 'C': case 'N': case 'O': case 'P': case 'S':
        case 'F': case 'I':
            return true;
        default:
            return false;
    }
}

bool is_aromatic_organic(char c) {
    switch (c) {
        case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
            return true;
        default:
            return false;
    }
}

bool is_bond_char(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\';
}

}  // namespace

std::vector<SmilesToken> tokenize_smiles(const std::string& s) {
    if (s.empty()) throw SmilesError("empty SMILES string", 0);
    std::vector<SmilesToken> out;
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        const char c = s[i];
        if (static_cast<unsigned char>(c) > 127) throw SmilesError("non-ASCII character", i);
        if (c == '[') {
            const size_t close = s.find(']', i + 1);
            if (close == std::string::npos) throw SmilesError("unbalanced '['", i);
            if (close == i + 1) throw SmilesError("empty bracket atom", i);
            out.push_back({TokKind::BracketAtom, s.substr(i, close - i + 1), i});
            i = close + 1;
        } else if (c == ']') {
            throw SmilesError("unbalanced ']'", i);
        } else if (c == '(') {
            out.push_back({TokKind::BranchOpen, "(", i});
            ++i;
        } else if (c == ')') {
            out.push_back({TokKind::BranchClose, ")", i});
            ++i;
        } else if (c == '.') {
            out.push_back({TokKind::Dot, ".", i});
            ++i;
        } else if (c == '%') {
            if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
                !std::isdigit(static_cast<unsigned char>(s[i + 2])))
                throw SmilesError("dangling '%' ring bond", i);
            out.push_back({TokKind::RingBond, s.substr(i, 3), i});
            i += 3;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            out.push_back({TokKind::RingBond, std::string(1, c), i});
            ++i;
        } else if (is_bond_char(c)) {
            out.push_back({TokKind::Bond, std::string(1, c), i});
            ++i;
        } else if (c == 'C' && i + 1 < n && s[i + 1] == 'l') {
            out.push_back({TokKind::Atom, "Cl", i});
            i += 2;
        } else if (c == 'B' && i + 1 < n && s[i + 1] == 'r') {
            out.push_back({TokKind::Atom, "Br", i});
            i += 2;
        } else if (is_organic_upper_start(c) || is_aromatic_organic(c) || c == '*') {
            out.push_back({TokKind::Atom, std::string(1, c), i});
            ++i;
        } else {
            throw SmilesError(std::string("illegal character '") + c + "'", i);
        }
    }
    return out;
}

namespace {

// Parses the inside of a bracket atom: [isotope?][symbol][@...][H count?]
// [charge?][:map?]. Stereo and atom maps are accepted and discarded.
Atom parse_bracket_atom(const std::string& tok, size_t pos) {
    Atom atom;
    size_t i = 1;                     // skip '['
    const size_t end = tok.size() - 1;  // index of ']'
    while (i < end && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;  // isotope
    if (i >= end) throw SmilesError("bracket atom without element: " + tok, pos);
    const char c = tok[i];
    if (c == '*') {
        atom.element = "*";
        ++i;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
        atom.element = std::string(1, c);
        ++i;
        if (i < end && std::islower(static_cast<unsigned char>(tok[i])) && tok[i] != 'h') {
            atom.element += tok[i];
            ++i;
        }
    } else if (std::islower(static_cast<unsigned char>(c))) {
        // aromatic: single-letter organic plus se/as
        if ((c == 's' || c == 'a') && i + 1 < end &&
            (tok.substr(i, 2) == "se" || tok.substr(i, 2) == "as")) {
            atom.element = tok.substr(i, 2);
            i += 2;
        } else if (is_aromatic_organic(c)) {
            atom.element = std::string(1, c);
            ++i;
        } else {
            throw SmilesError("illegal aromatic symbol in bracket atom: " + tok, pos);
        }
        atom.aromatic = true;
    } else {
        throw SmilesError("illegal bracket atom: " + tok, pos);
    }
    while (i < end && tok[i] == '@') ++i;  // stereo
    if (i < end && tok[i] == 'H') {
        ++i;
        int h = 1;
        if (i < end && std::isdigit(static_cast<unsigned char>(tok[i]))) {
            h = 0;
            while (i < end && std::isdigit(static_cast<unsigned char>(tok[i]))) {
                h = h * 10 + (tok[i] - '0');
                ++i;
            }
        }
        atom.explicit_h = h;
    }
    if (i < end && (tok[i] == '+' || tok[i] == '-')) {
        const int sign = tok[i] == '+' ? 1 : -1;
        const char sc = tok[i];
        ++i;
        int mag = 1;
        if (i < end && std::isdigit(static_cast<unsigned char>(tok[i]))) {
            mag = 0;
            while (i < end && std::isdigit(static_cast<unsigned char>(tok[i]))) {
                mag = mag * 10 + (tok[i] - '0');
                ++i;
            }
        } else {
            while (i < end && tok[i] == sc) {
                ++mag;
                ++i;
            }
        }
        atom.charge = sign * mag;
    }
    if (i < end && tok[i] == ':') {
        ++i;
        if (i >= end || !std::isdigit(static_cast<unsigned char>(tok[i])))
            throw SmilesError("bad atom map in bracket atom: " + tok, pos);
        while (i < end && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
    }
    if (i != end) throw SmilesError("trailing junk in bracket atom: " + tok, pos);
    return atom;
}

BondOrder bond_order_from_char(char c) {
    switch (c) {
        case '=': return BondOrder::Double;
        case '#': return BondOrder::Triple;
        case ':': return BondOrder::Aromatic;
        default: return BondOrder::Single;  // '-', '/', '\\'
    }
}

}  // namespace

Molecule parse_molecule(const std::string& s) {
    const auto tokens = tokenize_smiles(s);
    Molecule mol;
    std::vector<int> branch_stack;
    std::optional<BondOrder> pending;
    struct RingOpen {
        int atom;
        std::optional<BondOrder> order;
    };
    std::map<std::string, RingOpen> open_rings;
    std::set<std::pair<int, int>> seen_bonds;
    int prev = -1;

    auto add_bond = [&](int a, int b, std::optional<BondOrder> order, size_t pos) {
        if (a == b) throw SmilesError("ring bond closing onto its own atom", pos);
        const auto key = std::minmax(a, b);
        if (!seen_bonds.insert({key.first, key.second}).second)
            throw SmilesError("duplicate bond between atoms", pos);
        BondOrder o;
        if (order)
            o = *order;
        else if (mol.atoms[static_cast<size_t>(a)].aromatic &&
                 mol.atoms[static_cast<size_t>(b)].aromatic)
            o = BondOrder::Aromatic;
        else
            o = BondOrder::Single;
        mol.bonds.push_back({a, b, o});
    };

    for (const auto& tok : tokens) {
        switch (tok.kind) {
            case TokKind::Atom:
            case TokKind::BracketAtom: {
                Atom atom;
                if (tok.kind == TokKind::Atom) {
                    if (tok.text == "*") {
                        atom.element = "*";
                    } else if (std::islower(static_cast<unsigned char>(tok.text[0]))) {
                        atom.element = tok.text;
                        atom.element[0] = static_cast<char>(
                            std::toupper(static_cast<unsigned char>(atom.element[0])));
                        atom.aromatic = true;
                    } else {
                        atom.element = tok.text;
                    }
                } else {
                    atom = parse_bracket_atom(tok.text, tok.position);
                    if (atom.aromatic) {
                        atom.element[0] = static_cast<char>(
                            std::toupper(static_cast<unsigned char>(atom.element[0])));
                    }
                }
                mol.atoms.push_back(atom);
                const int idx = static_cast<int>(mol.atoms.size()) - 1;
                if (prev >= 0) add_bond(prev, idx, pending, tok.position);
                pending.reset();
                prev = idx;
                break;
            }
            case TokKind::Bond:
                if (pending) throw SmilesError("two consecutive bond symbols", tok.position);
                if (prev < 0) throw SmilesError("bond with no preceding atom", tok.position);
                pending = bond_order_from_char(tok.text[0]);
                break;
            case TokKind::RingBond: {
                if (prev < 0) throw SmilesError("ring bond with no preceding atom", tok.position);
                auto it = open_rings.find(tok.text);
                if (it == open_rings.end()) {
                    open_rings[tok.text] = {prev, pending};
                    pending.reset();
                } else {
                    std::optional<BondOrder> order = it->second.order;
                    if (pending) {
                        if (order && *order != *pending)
                            throw SmilesError("conflicting ring bond orders", tok.position);
                        order = pending;
                    }
                    add_bond(it->second.atom, prev, order, tok.position);
                    open_rings.erase(it);
                    pending.reset();
                }
                break;
            }
            case TokKind::BranchOpen:
                if (prev < 0) throw SmilesError("branch with no preceding atom", tok.position);
                if (pending) throw SmilesError("bond symbol before '('", tok.position);
                branch_stack.push_back(prev);
                break;
            case TokKind::BranchClose:
                if (branch_stack.empty()) throw SmilesError("unmatched ')'", tok.position);
                if (pending) throw SmilesError("dangling bond before ')'", tok.position);
                prev = branch_stack.back();
                branch_stack.pop_back();
                break;
            case TokKind::Dot:
                if (pending) throw SmilesError("bond symbol before '.'", tok.position);
                if (!branch_stack.empty())
                    throw SmilesError("'.' inside a branch is not supported", tok.position);
                prev = -1;
                break;
        }
    }
    if (!open_rings.empty())
        throw SmilesError("unclosed ring bond '" + open_rings.begin()->first + "'", s.size());
    if (!branch_stack.empty()) throw SmilesError("unclosed branch", s.size());
    if (pending) throw SmilesError("dangling bond at end of input", s.size());
    if (mol.atoms.empty()) throw SmilesError("no atoms in SMILES", 0);
    return mol;
}

namespace {

// split token stream on top-level dots, returning joined component strings
std::vector<std::string> split_components(const std::vector<SmilesToken>& tokens) {
    std::vector<std::string> parts;
    std::string current;
    int depth = 0;
    for (const auto& tok : tokens) {
        if (tok.kind == TokKind::BranchOpen) ++depth;
        if (tok.kind == TokKind::BranchClose) --depth;
        if (tok.kind == TokKind::Dot && depth == 0) {
            if (current.empty()) throw SmilesError("empty component around '.'", tok.position);
            parts.push_back(std::move(current));
            current.clear();
        } else {
            current += tok.text;
        }
    }
    if (current.empty()) throw SmilesError("empty trailing component", 0);
    parts.push_back(std::move(current));
    return parts;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> split_reaction(const std::string& s) {
    const size_t arrow = s.find(">>");
    if (arrow == std::string::npos)
        throw SmilesError("reaction string has no '>>' separator", 0);
    if (s.find('>', arrow + 2) != std::string::npos)
        throw SmilesError("reaction string has multiple '>' separators", arrow + 2);
    if (arrow > 0 && s.rfind('>', arrow - 1) != std::string::npos)
        throw SmilesError("reaction string has multiple '>' separators", 0);
    const std::string left = s.substr(0, arrow);
    const std::string right = s.substr(arrow + 2);
    if (left.empty()) throw SmilesError("reaction has no reactants", 0);
    if (right.empty()) throw SmilesError("reaction has no products", arrow + 2);
    return {split_components(tokenize_smiles(left)), split_components(tokenize_smiles(right))};
}

void ConditionGrouping::add_group(const std::string& dot_joined) {
    Group g;
    g.canonical = dot_joined;
    std::string frag;
    int bracket = 0;
    for (char c : dot_joined) {
        if (c == '[') ++bracket;
        if (c == ']') --bracket;
        if (c == '.' && bracket == 0) {
            g.fragments.push_back(frag);
            frag.clear();
        } else {
            frag += c;
        }
    }
    g.fragments.push_back(frag);
    if (g.fragments.size() < 2)
        throw std::invalid_argument("grouping entry needs at least two fragments: " + dot_joined);
    std::sort(g.fragments.begin(), g.fragments.end());
    groups_.push_back(std::move(g));
    std::stable_sort(groups_.begin(), groups_.end(),
                     [](const Group& a, const Group& b) {
                         return a.fragments.size() > b.fragments.size();
                     });
}

ConditionGrouping ConditionGrouping::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open grouping file: " + path);
    ConditionGrouping g;
    std::string line;
    while (std::getline(is, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        size_t start = 0;
        while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start])))
            ++start;
        line.erase(0, start);
        if (line.empty()) continue;
        g.add_group(line);
    }
    return g;
}

ConditionGrouping ConditionGrouping::builtin_defaults() {
    ConditionGrouping g;
    g.add_group("[Na+].[OH-]");
    g.add_group("[K+].[OH-]");
    g.add_group("[Cl-].[NH4+]");
    return g;
}

std::vector<std::string> ConditionGrouping::split(const std::string& joined) const {
    std::vector<std::string> fragments;
    {
        std::string frag;
        int bracket = 0;
        for (char c : joined) {
            if (c == '[') ++bracket;
            if (c == ']') --bracket;
            if (c == '.' && bracket == 0) {
                fragments.push_back(frag);
                frag.clear();
            } else {
                frag += c;
            }
        }
        if (!frag.empty() || !fragments.empty()) fragments.push_back(frag);
    }
    if (joined.empty()) return {};

    std::vector<std::string> out;
    size_t i = 0;
    while (i < fragments.size()) {
        bool merged = false;
        for (const auto& g : groups_) {  // longest groups first
            const size_t k = g.fragments.size();
            if (i + k > fragments.size()) continue;
            std::vector<std::string> window(fragments.begin() + static_cast<long>(i),
                                            fragments.begin() + static_cast<long>(i + k));
            std::sort(window.begin(), window.end());
            if (window == g.fragments) {
                out.push_back(g.canonical);
                i += k;
                merged = true;
                break;
            }
        }
        if (!merged) {
            out.push_back(fragments[i]);
            ++i;
        }
    }
    return out;
}

ReactionRecord make_record(std::string id, const std::string& reaction_smiles) {
    ReactionRecord r;
    r.id = std::move(id);
    r.raw = reaction_smiles;
    auto [reactants, products] = split_reaction(reaction_smiles);
    r.reactants = std::move(reactants);
    r.products = std::move(products);
    return r;
}

}  // namespace rxncond
