#pragma once

// End-to-end orchestration: assembles the encoders, projectors and
// decoder into the two task pipelines (slot classification and joined
// condition generation), and drives training, evaluation and
// candidate-restricted recommendation.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rxncond/dataset.hpp"
#include "rxncond/decoder.hpp"
#include "rxncond/gradcheck.hpp"
#include "rxncond/graph_encoder.hpp"
#include "rxncond/metrics.hpp"
#include "rxncond/projector.hpp"
#include "rxncond/prompts.hpp"
#include "rxncond/seq_encoder.hpp"

namespace rxncond {

struct ModelConfig {
    int enc_width = 64;
    int enc_layers = 2;
    int enc_heads = 4;
    int enc_max_len = 128;
    int graph_hidden = 64;
    int graph_layers = 2;
    int graph_width = 64;  // C_g
    int llm_width = 64;
    int dec_layers = 2;
    int dec_heads = 4;
    int dec_ffn_mult = 4;
    int smiles_tokens = 128;  // projector output counts
    int graph_tokens = 3;
    int proj_heads = 4;
    int proj_tower = 2;
    int max_question_tokens = 96;
    int max_answer_tokens = 48;
};

enum class Task { Classify, Generate };
Task parse_task(const std::string& s);
const char* task_name(Task t);

// The assembled system. Parameters live in an external ParamStore under
// the prefixes seq_enc. / graph_enc. / projector.smiles. /
// projector.graph. / decoder. / heads.
class Model {
public:
    Model() = default;
    Model(ModelConfig cfg, CondVocab cond_vocab, TokenVocab token_vocab);

    void init_params(ParamStore& store, uint64_t seed);

    // encode both modalities, project, and assemble
    // [smiles ; graph ; question] context tokens
    ContextTokens build_context(const ParamStore& store, const InstructionExample& ex) const;

    Tensor example_loss(const ParamStore& store, const InstructionExample& ex, Task task) const;

    std::array<int, kSlotCount> slot_labels(const InstructionExample& ex) const;

    const CondVocab& cond_vocab() const { return cond_; }
    const TokenVocab& token_vocab() const { return tok_; }
    const ModelConfig& config() const { return cfg_; }
    const Decoder& decoder() const { return decoder_; }
    const ClassificationHeads& heads() const { return heads_; }

private:
    ModelConfig cfg_;
    CondVocab cond_;
    TokenVocab tok_;
    SeqEncoder seq_enc_;
    GraphEncoder graph_enc_;
    PerceiverProjector proj_smiles_;
    PerceiverProjector proj_graph_;
    Decoder decoder_;
    ClassificationHeads heads_;
};

// Vocabularies for a training set of instruction examples: slot labels
// (frequency ordered) plus reaction, answer, and question tokens.
std::pair<CondVocab, TokenVocab> build_vocabs_from_examples(
    const std::vector<InstructionExample>& examples);

struct TrainConfig {
    ModelConfig model;
    Task task = Task::Classify;
    std::string train_jsonl;
    std::string out_dir = ".";
    int epochs = 30;
    int batch_size = 16;
    double max_lr = 3e-5;
    double warmup_fraction = 0.3;
    double final_lr_fraction = 1e-2;
    uint64_t seed = 0;
    std::vector<std::string> freeze_prefixes;
    int threads = 0;           // 0: leave the OpenMP default
    int checkpoint_every = 1;  // epochs; 0 disables intermediate checkpoints
    // optional convergence stop: evaluate the training set every
    // eval_every epochs and stop once target_accuracy is reached
    int eval_every = 0;
    double target_accuracy = 1.0;
};

TrainConfig load_train_config(const std::string& path);

struct TrainResult {
    std::string checkpoint;  // final checkpoint path (sidecar: + .vocab.json)
    double final_loss = 0.0;
    int steps_run = 0;
    int epochs_run = 0;
    double train_accuracy = -1.0;  // last convergence measurement, if any
};

TrainResult train(const TrainConfig& cfg);

// Writes the checkpoint plus its vocab/config sidecar (path + ".vocab.json").
void save_model(const std::string& checkpoint_path, const ParamStore& store, const Model& model,
                Task task);

// Loads checkpoint + sidecar and rebuilds the model; verifies the vocab
// compatibility hash.
struct LoadedModel {
    Model model;
    ParamStore store;
    Task task = Task::Classify;
};
LoadedModel load_model(const std::string& checkpoint_path);

// accuracy of the classification model on examples (top-1 across all
// slots); used by the convergence monitor and the overfit checks
double classify_slot_accuracy(const Model& model, const ParamStore& store,
                              const std::vector<InstructionExample>& examples,
                              std::array<double, kSlotCount>* per_slot = nullptr);
// exact-match rate of greedy decodes against the answers
double generate_exact_match(const Model& model, const ParamStore& store,
                            const std::vector<InstructionExample>& examples);

struct EvalOptions {
    std::string checkpoint;
    std::string data_jsonl;
    std::vector<int> ks = {1, 3, 5};
    int beam_width = 10;
    int max_len = 0;  // 0: model.max_answer_tokens
    std::string groups_file;
    std::string out_json = "report.json";
    std::string out_csv = "report.csv";
    std::string partial_role;  // non-empty: also score top-1 partial match against slot truths
    std::string lenient_common_file;  // optional solvent list for the lenient partial mode
    std::string model_name = "rxncond";
};

MetricReport evaluate(const EvalOptions& opts);

struct RecommendOptions {
    std::string checkpoint;
    std::string reaction;
    std::string role;  // classification slot name; informational for generation
    std::vector<std::string> candidates;
    int k = 5;
    int beam_width = 10;
    int max_len = 0;
};

std::vector<std::pair<std::string, double>> recommend(const RecommendOptions& opts);

// check-grad entry: op suite + composed-model finite differences
SuiteReport run_full_gradient_suite(uint64_t seed);

// Synthetic fixture generation (also used by the acceptance suite).
struct FixtureSpec {
    int records = 128;
    int catalysts = 8;
    int solvents = 6;
    int reagents = 10;
    bool generation = false;  // slot flavor by default
    uint64_t seed = 0;
};
std::vector<ReactionRecord> make_synthetic_records(const FixtureSpec& spec);

}  // namespace rxncond
