#include "rxncond/graph_encoder.hpp"

#include <array>
#include <stdexcept>

namespace rxncond {

namespace {

const std::array<const char*, 16>& element_vocab() {
    static const std::array<const char*, 16> v = {"H",  "B",  "C",  "N",  "O",  "F",
                                                  "Si", "P",  "S",  "Cl", "As", "Se",
                                                  "Br", "Sn", "I",  "*"};
    return v;
}

int element_index(const std::string& el) {
    const auto& v = element_vocab();
    for (size_t i = 0; i < v.size(); ++i)
        if (el == v[i]) return static_cast<int>(i);
    return static_cast<int>(v.size());  // "other"
}

int relation_of(BondOrder order, bool reverse) {
    return static_cast<int>(order) + (reverse ? 4 : 0);
}

}  // namespace

int atom_feature_width() { return static_cast<int>(element_vocab().size()) + 1 + 1 + 1; }

RelGraph build_rel_graph(const Molecule& mol, Dtype dt) {
    if (mol.atoms.empty()) throw std::invalid_argument("cannot build graph of empty molecule");
    const int n = static_cast<int>(mol.atoms.size());
    const int d0 = atom_feature_width();
    RelGraph g;
    g.node_features = Tensor::zeros({n, d0}, dt);
    for (int i = 0; i < n; ++i) {
        const Atom& a = mol.atoms[static_cast<size_t>(i)];
        g.node_features.set(i, element_index(a.element), 1.0);
        g.node_features.set(i, d0 - 2, a.aromatic ? 1.0 : 0.0);
        g.node_features.set(i, d0 - 1, a.charge > 0 ? 1.0 : (a.charge < 0 ? -1.0 : 0.0));
    }
    for (const Bond& b : mol.bonds) {
        g.edges.push_back({b.i, b.j, relation_of(b.order, false)});
        g.edges.push_back({b.j, b.i, relation_of(b.order, true)});
    }
    return g;
}

GraphEncoder::GraphEncoder(GraphEncoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {}

void GraphEncoder::init(ParamStore& store, Rng& rng) {
    layers_.clear();
    int in = cfg_.in_width > 0 ? cfg_.in_width : atom_feature_width();
    for (int l = 0; l < cfg_.layers; ++l) {
        Layer layer;
        const std::string lp = prefix_ + ".layer" + std::to_string(l);
        for (int r = 0; r < kRelationCount; ++r)
            layer.relation.push_back(
                nn::Linear::create(store, lp + ".rel" + std::to_string(r), in, cfg_.hidden, rng,
                                   /*bias=*/false));
        layer.self_loop = nn::Linear::create(store, lp + ".self", in, cfg_.hidden, rng,
                                             /*bias=*/false);
        layers_.push_back(std::move(layer));
        in = cfg_.hidden;
    }
    out_proj_ = nn::Linear::create(store, prefix_ + ".proj", 2 * cfg_.hidden, cfg_.out_width, rng);
}

Tensor GraphEncoder::rgcn_forward(const ParamStore& store, const RelGraph& g) const {
    const int n = g.node_features.dim(0);
    for (const auto& e : g.edges)
        if (e.relation < 0 || e.relation >= g.relation_count)
            throw std::out_of_range("edge relation index out of range");

    // per-relation degree-normalized adjacency, built once per graph
    std::vector<std::vector<int>> in_degree(static_cast<size_t>(kRelationCount),
                                            std::vector<int>(static_cast<size_t>(n), 0));
    for (const auto& e : g.edges) ++in_degree[static_cast<size_t>(e.relation)][static_cast<size_t>(e.dst)];
    std::vector<Tensor> adj(static_cast<size_t>(kRelationCount));
    std::vector<bool> has_edges(static_cast<size_t>(kRelationCount), false);
    for (const auto& e : g.edges) has_edges[static_cast<size_t>(e.relation)] = true;
    for (int r = 0; r < kRelationCount; ++r) {
        if (!has_edges[static_cast<size_t>(r)]) continue;
        adj[static_cast<size_t>(r)] = Tensor::zeros({n, n}, g.node_features.dtype());
    }
    for (const auto& e : g.edges) {
        Tensor& a = adj[static_cast<size_t>(e.relation)];
        a.set(e.dst, e.src,
              1.0 / in_degree[static_cast<size_t>(e.relation)][static_cast<size_t>(e.dst)]);
    }

    Tensor h = g.node_features;
    for (const auto& layer : layers_) {
        Tensor acc = layer.self_loop(store, h);
        for (int r = 0; r < kRelationCount; ++r) {
            if (!has_edges[static_cast<size_t>(r)]) continue;
            acc = add(acc, layer.relation[static_cast<size_t>(r)](store,
                                                                  matmul(adj[static_cast<size_t>(r)], h)));
        }
        h = relu(acc);
    }
    return h;
}

Tensor GraphEncoder::molecule_embed(const ParamStore& store, const Molecule& mol) const {
    const RelGraph g = build_rel_graph(mol, default_dtype());
    const Tensor states = rgcn_forward(store, g);
    return reshape(mean_rows(states), {1, cfg_.hidden});
}

Tensor GraphEncoder::reaction_embed(const ParamStore& store, const ReactionRecord& record) const {
    auto side_mean = [&](const std::vector<std::string>& smiles_list) {
        std::vector<Tensor> embeds;
        embeds.reserve(smiles_list.size());
        for (const auto& s : smiles_list) embeds.push_back(molecule_embed(store, parse_molecule(s)));
        if (embeds.empty()) throw std::invalid_argument("reaction side has no molecules");
        if (embeds.size() == 1) return embeds[0];
        return reshape(mean_rows(concat(embeds, 0)), {1, cfg_.hidden});
    };
    const Tensor reactants = side_mean(record.reactants);
    const Tensor products = side_mean(record.products);
    return out_proj_(store, concat({reactants, products}, 1));
}

}  // namespace rxncond
