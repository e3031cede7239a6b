#pragma once

// Relational graph convolution over molecule graphs. Each chemical bond
// yields two directed edges (forward and reverse relation per bond
// order), giving 8 relation types. Layer update:
//   h_i' = ReLU( sum_r sum_{j in N_i^r} (1/c_{i,r}) W_r h_j + W0 h_i )
// with c_{i,r} = |N_i^r|.

#include <string>
#include <vector>

#include "rxncond/nn.hpp"
#include "rxncond/smiles.hpp"

namespace rxncond {

inline constexpr int kRelationCount = 8;  // {single,double,triple,aromatic} x {fwd,rev}

struct RelGraph {
    struct Edge {
        int src, dst, relation;  // message flows src -> dst
    };
    Tensor node_features;  // [n x d0], constant
    std::vector<Edge> edges;
    int relation_count = kRelationCount;
};

// one-hot element over a fixed 16-symbol vocabulary + "other", plus
// aromatic flag and charge sign
int atom_feature_width();
RelGraph build_rel_graph(const Molecule& mol, Dtype dt);

struct GraphEncoderConfig {
    int hidden = 64;
    int layers = 2;
    int out_width = 64;  // C_g of the fused reaction embedding
    int in_width = 0;    // 0 means atom_feature_width()
};

class GraphEncoder {
public:
    GraphEncoder() = default;
    GraphEncoder(GraphEncoderConfig cfg, std::string prefix = "graph_enc");

    void init(ParamStore& store, Rng& rng);

    // per-node states after all layers, [n x hidden]
    Tensor rgcn_forward(const ParamStore& store, const RelGraph& g) const;
    // mean-pooled node states, [1 x hidden]
    Tensor molecule_embed(const ParamStore& store, const Molecule& mol) const;
    // concat(mean reactant embedding, mean product embedding) projected
    // to out_width, [1 x out_width]
    Tensor reaction_embed(const ParamStore& store, const ReactionRecord& record) const;

    const GraphEncoderConfig& config() const { return cfg_; }

private:
    GraphEncoderConfig cfg_;
    std::string prefix_;
    struct Layer {
        std::vector<nn::Linear> relation;  // one per relation, no bias
        nn::Linear self_loop;
    };
    std::vector<Layer> layers_;
    nn::Linear out_proj_;
};

}  // namespace rxncond
