#include "rxncond/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "rxncond/checkpoint.hpp"

namespace rxncond {

Task parse_task(const std::string& s) {
    if (s == "classify") return Task::Classify;
    if (s == "generate") return Task::Generate;
    throw std::invalid_argument("unknown task '" + s + "' (expected classify or generate)");
}

const char* task_name(Task t) { return t == Task::Classify ? "classify" : "generate"; }

// ------------------------------------------------------------------ Model

Model::Model(ModelConfig cfg, CondVocab cond_vocab, TokenVocab token_vocab)
    : cfg_(cfg), cond_(std::move(cond_vocab)), tok_(std::move(token_vocab)) {
    SeqEncoderConfig sc;
    sc.vocab_size = tok_.size();
    sc.max_len = cfg_.enc_max_len;
    sc.width = cfg_.enc_width;
    sc.heads = cfg_.enc_heads;
    sc.layers = cfg_.enc_layers;
    seq_enc_ = SeqEncoder(sc);

    GraphEncoderConfig gc;
    gc.hidden = cfg_.graph_hidden;
    gc.layers = cfg_.graph_layers;
    gc.out_width = cfg_.graph_width;
    graph_enc_ = GraphEncoder(gc);

    ProjectorConfig ps;
    ps.out_tokens = cfg_.smiles_tokens;
    ps.in_tokens = cfg_.enc_max_len;
    ps.in_width = cfg_.enc_width;
    ps.llm_width = cfg_.llm_width;
    ps.heads = cfg_.proj_heads;
    ps.tower_blocks = cfg_.proj_tower;
    proj_smiles_ = PerceiverProjector(ps, "projector.smiles");

    ProjectorConfig pg = ps;
    pg.out_tokens = cfg_.graph_tokens;
    pg.in_tokens = 1;  // the fused reaction-graph embedding is one token
    pg.in_width = cfg_.graph_width;
    proj_graph_ = PerceiverProjector(pg, "projector.graph");

    DecoderConfig dc;
    dc.vocab_size = tok_.size();
    dc.width = cfg_.llm_width;
    dc.heads = cfg_.dec_heads;
    dc.layers = cfg_.dec_layers;
    dc.ffn_mult = cfg_.dec_ffn_mult;
    dc.max_positions = cfg_.smiles_tokens + cfg_.graph_tokens + cfg_.max_question_tokens +
                       cfg_.max_answer_tokens + 2;
    decoder_ = Decoder(dc);

    std::array<int, kSlotCount> sizes{};
    for (int s = 0; s < kSlotCount; ++s) sizes[static_cast<size_t>(s)] = cond_.slot_size(s);
    heads_ = ClassificationHeads(sizes, cfg_.llm_width);
}

void Model::init_params(ParamStore& store, uint64_t seed) {
    Rng rng(mix_seed(seed, 0x6d6f64656cull));
    seq_enc_.init(store, rng);
    graph_enc_.init(store, rng);
    proj_smiles_.init(store, rng, tok_.size());
    proj_graph_.init(store, rng, tok_.size());
    decoder_.init(store, rng);
    heads_.init(store, rng);
}

ContextTokens Model::build_context(const ParamStore& store, const InstructionExample& ex) const {
    const auto reaction_ids = tok_.encode_question(ex.reaction_smiles);
    const Tensor seq_out = seq_enc_.encode(store, reaction_ids);

    const ReactionRecord record = make_record(ex.id, ex.reaction_smiles);
    const Tensor graph_embed = graph_enc_.reaction_embed(store, record);

    const Tensor table = decoder_.word_table(store);
    const Tensor smiles_tokens = proj_smiles_.project(store, seq_out, table);
    const Tensor graph_tokens = proj_graph_.project(store, graph_embed, table);

    auto question_ids = tok_.encode_question(ex.question);
    if (static_cast<int>(question_ids.size()) > cfg_.max_question_tokens)
        question_ids.resize(static_cast<size_t>(cfg_.max_question_tokens));
    ContextTokens ctx;
    if (question_ids.empty()) {
        ctx.tokens = assemble_context(smiles_tokens, graph_tokens, nullptr);
    } else {
        const Tensor text = gather_rows(table, question_ids);
        ctx.tokens = assemble_context(smiles_tokens, graph_tokens, &text);
    }
    return ctx;
}

std::array<int, kSlotCount> Model::slot_labels(const InstructionExample& ex) const {
    if (!ex.slots) throw std::invalid_argument("example " + ex.id + " has no slot labels");
    std::array<int, kSlotCount> labels{};
    for (int s = 0; s < kSlotCount; ++s) {
        const auto idx = cond_.lookup(s, (*ex.slots)[static_cast<size_t>(s)]);
        if (!idx)
            throw std::out_of_range("example " + ex.id + ": label '" +
                                    (*ex.slots)[static_cast<size_t>(s)] +
                                    "' not in training vocabulary of slot " +
                                    kSlotNames[static_cast<size_t>(s)]);
        labels[static_cast<size_t>(s)] = *idx;
    }
    return labels;
}

Tensor Model::example_loss(const ParamStore& store, const InstructionExample& ex,
                           Task task) const {
    const ContextTokens ctx = build_context(store, ex);
    if (task == Task::Classify)
        return classification_loss(store, decoder_, heads_, ctx, slot_labels(ex));
    auto target = tok_.encode_answer(ex.answer);
    if (static_cast<int>(target.size()) > cfg_.max_answer_tokens) {
        target.resize(static_cast<size_t>(cfg_.max_answer_tokens));
        target.back() = TokenVocab::kEos;
    }
    return generation_loss(store, decoder_, ctx, target);
}

// ------------------------------------------------------------ vocab build

std::pair<CondVocab, TokenVocab> build_vocabs_from_examples(
    const std::vector<InstructionExample>& examples) {
    CondVocab cond;
    TokenVocab tok;
    std::array<std::map<std::string, size_t>, kSlotCount> freq;
    for (const auto& ex : examples) {
        if (ex.slots)
            for (int s = 0; s < kSlotCount; ++s) {
                const auto& label = (*ex.slots)[static_cast<size_t>(s)];
                if (label != kNoneLabel) ++freq[static_cast<size_t>(s)][label];
            }
        tok.add_question_tokens(ex.question);
        try {
            tok.add_reaction_tokens(ex.reaction_smiles);
        } catch (const SmilesError&) {
        }
        if (!ex.slots) {
            try {
                tok.add_reaction_tokens(ex.answer);
            } catch (const SmilesError&) {
            }
        }
    }
    for (int s = 0; s < kSlotCount; ++s) {
        std::vector<std::pair<std::string, size_t>> ordered(freq[static_cast<size_t>(s)].begin(),
                                                            freq[static_cast<size_t>(s)].end());
        std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [label, _] : ordered) cond.add(s, label);
    }
    return {std::move(cond), std::move(tok)};
}

// ---------------------------------------------------------------- config

namespace {

void read_model_config(const nlohmann::json& j, ModelConfig& m) {
    auto get = [&](const char* key, int& field) {
        if (j.contains(key)) field = j.at(key).get<int>();
    };
    get("enc_width", m.enc_width);
    get("enc_layers", m.enc_layers);
    get("enc_heads", m.enc_heads);
    get("enc_max_len", m.enc_max_len);
    get("graph_hidden", m.graph_hidden);
    get("graph_layers", m.graph_layers);
    get("graph_width", m.graph_width);
    get("llm_width", m.llm_width);
    get("dec_layers", m.dec_layers);
    get("dec_heads", m.dec_heads);
    get("dec_ffn_mult", m.dec_ffn_mult);
    get("smiles_tokens", m.smiles_tokens);
    get("graph_tokens", m.graph_tokens);
    get("proj_heads", m.proj_heads);
    get("proj_tower", m.proj_tower);
    get("max_question_tokens", m.max_question_tokens);
    get("max_answer_tokens", m.max_answer_tokens);
}

nlohmann::ordered_json model_config_json(const ModelConfig& m) {
    nlohmann::ordered_json j;
    j["enc_width"] = m.enc_width;
    j["enc_layers"] = m.enc_layers;
    j["enc_heads"] = m.enc_heads;
    j["enc_max_len"] = m.enc_max_len;
    j["graph_hidden"] = m.graph_hidden;
    j["graph_layers"] = m.graph_layers;
    j["graph_width"] = m.graph_width;
    j["llm_width"] = m.llm_width;
    j["dec_layers"] = m.dec_layers;
    j["dec_heads"] = m.dec_heads;
    j["dec_ffn_mult"] = m.dec_ffn_mult;
    j["smiles_tokens"] = m.smiles_tokens;
    j["graph_tokens"] = m.graph_tokens;
    j["proj_heads"] = m.proj_heads;
    j["proj_tower"] = m.proj_tower;
    j["max_question_tokens"] = m.max_question_tokens;
    j["max_answer_tokens"] = m.max_answer_tokens;
    return j;
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    is >> j;
    TrainConfig cfg;
    if (j.contains("model")) read_model_config(j.at("model"), cfg.model);
    if (j.contains("task")) cfg.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("train_jsonl")) cfg.train_jsonl = j.at("train_jsonl").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("max_lr")) cfg.max_lr = j.at("max_lr").get<double>();
    if (j.contains("warmup_fraction")) cfg.warmup_fraction = j.at("warmup_fraction").get<double>();
    if (j.contains("final_lr_fraction"))
        cfg.final_lr_fraction = j.at("final_lr_fraction").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("freeze"))
        cfg.freeze_prefixes = j.at("freeze").get<std::vector<std::string>>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("checkpoint_every")) cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
    if (j.contains("eval_every")) cfg.eval_every = j.at("eval_every").get<int>();
    if (j.contains("target_accuracy")) cfg.target_accuracy = j.at("target_accuracy").get<double>();
    if (j.contains("precision")) set_default_dtype(parse_dtype(j.at("precision").get<std::string>()));
    return cfg;
}

// ----------------------------------------------------------------- train

namespace {

void write_sidecar(const std::string& checkpoint_path, const Model& model, Task task) {
    nlohmann::ordered_json j;
    j["task"] = task_name(task);
    j["precision"] = dtype_name(default_dtype());
    j["model"] = model_config_json(model.config());
    nlohmann::ordered_json cond = nlohmann::ordered_json::array();
    for (int s = 0; s < kSlotCount; ++s) {
        nlohmann::ordered_json labels = nlohmann::ordered_json::array();
        for (int i = 0; i < model.cond_vocab().slot_size(s); ++i)
            labels.push_back(model.cond_vocab().label(s, i));
        cond.push_back(labels);
    }
    j["cond_vocab"] = cond;
    nlohmann::ordered_json toks = nlohmann::ordered_json::array();
    for (int i = 0; i < model.token_vocab().size(); ++i)
        toks.push_back(model.token_vocab().token(i));
    j["token_vocab"] = toks;
    j["vocab_hash"] = model.cond_vocab().hash() ^ model.token_vocab().hash();
    std::ofstream os(checkpoint_path + ".vocab.json", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write sidecar for " + checkpoint_path);
    os << j.dump(2) << '\n';
}

double convergence_metric(const Model& model, const ParamStore& store, Task task,
                          const std::vector<InstructionExample>& examples) {
    if (task == Task::Classify) {
        // the weakest slot gates convergence
        std::array<double, kSlotCount> per_slot{};
        classify_slot_accuracy(model, store, examples, &per_slot);
        return *std::min_element(per_slot.begin(), per_slot.end());
    }
    return generate_exact_match(model, store, examples);
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    const auto examples = read_examples_jsonl(cfg.train_jsonl);
    if (examples.empty()) throw std::runtime_error("training set is empty: " + cfg.train_jsonl);
    if (cfg.task == Task::Classify)
        for (const auto& ex : examples)
            if (!ex.slots)
                throw std::runtime_error("classify task needs slot labels; example " + ex.id +
                                         " has none");

    auto [cond, tok] = build_vocabs_from_examples(examples);
    Model model(cfg.model, std::move(cond), std::move(tok));
    ParamStore store;
    model.init_params(store, cfg.seed);
    for (const auto& p : cfg.freeze_prefixes) store.freeze_prefix(p);

    const int batches_per_epoch =
        static_cast<int>((examples.size() + cfg.batch_size - 1) / cfg.batch_size);
    OneCycleSchedule schedule;
    schedule.max_lr = cfg.max_lr;
    schedule.total_steps = std::max(2, cfg.epochs * batches_per_epoch);
    schedule.warmup_fraction = cfg.warmup_fraction;
    schedule.final_lr_fraction = cfg.final_lr_fraction;
    schedule.validate();
    AdamOptimizer opt;

    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream log(cfg.out_dir + "/train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open training log in " + cfg.out_dir);
    log.precision(17);

    TrainResult result;
    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0xe90c + static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (int b = 0; b < batches_per_epoch; ++b) {
            const size_t begin = static_cast<size_t>(b) * cfg.batch_size;
            const size_t end = std::min(begin + cfg.batch_size, examples.size());
            Tape tape;
            Tensor batch_loss;
            for (size_t i = begin; i < end; ++i) {
                Tensor l = model.example_loss(store, examples[order[i]], cfg.task);
                batch_loss = (i == begin) ? l : add(batch_loss, l);
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - begin));
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(step) +
                                         "; lower max_lr or check the data");
            store.zero_grad();
            tape.backward(batch_loss);
            opt.step(store, schedule, step);
            log << "{\"step\":" << step << ",\"epoch\":" << epoch << ",\"lr\":"
                << schedule.lr(step) << ",\"loss\":" << loss_value << "}\n";
            result.final_loss = loss_value;
            ++step;
        }
        result.epochs_run = epoch + 1;
        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "ckpt_e%04d.ntf", epoch + 1);
            save_checkpoint(cfg.out_dir + "/" + name, store);
        }
        if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            result.train_accuracy = convergence_metric(model, store, cfg.task, examples);
            log << "{\"epoch\":" << epoch << ",\"train_accuracy\":" << result.train_accuracy
                << "}\n";
            if (result.train_accuracy >= cfg.target_accuracy) break;
        }
    }
    result.steps_run = step;
    result.checkpoint = cfg.out_dir + "/model.ntf";
    save_model(result.checkpoint, store, model, cfg.task);
    return result;
}

void save_model(const std::string& checkpoint_path, const ParamStore& store, const Model& model,
                Task task) {
    save_checkpoint(checkpoint_path, store);
    write_sidecar(checkpoint_path, model, task);
}

// ------------------------------------------------------------------ load

LoadedModel load_model(const std::string& checkpoint_path) {
    std::ifstream is(checkpoint_path + ".vocab.json");
    if (!is)
        throw std::runtime_error("missing sidecar " + checkpoint_path +
                                 ".vocab.json (written next to every checkpoint)");
    nlohmann::json j;
    is >> j;
    ModelConfig mc;
    read_model_config(j.at("model"), mc);
    CondVocab cond;
    const auto& cv = j.at("cond_vocab");
    for (int s = 0; s < kSlotCount; ++s)
        for (const auto& label : cv.at(static_cast<size_t>(s)))
            cond.add(s, label.get<std::string>());
    TokenVocab tok;
    const auto& tv = j.at("token_vocab");
    for (size_t i = TokenVocab::kReserved; i < tv.size(); ++i)
        tok.add(tv.at(i).get<std::string>());
    const uint64_t expect = j.at("vocab_hash").get<uint64_t>();
    if ((cond.hash() ^ tok.hash()) != expect)
        throw std::runtime_error("vocab hash mismatch for " + checkpoint_path);
    if (j.contains("precision"))
        set_default_dtype(parse_dtype(j.at("precision").get<std::string>()));

    LoadedModel lm;
    lm.task = parse_task(j.at("task").get<std::string>());
    lm.model = Model(mc, std::move(cond), std::move(tok));
    load_checkpoint(checkpoint_path, lm.store);
    // reconstructing layer wiring requires an init pass; parameters are
    // then replaced by the checkpoint contents
    ParamStore shape_check;
    lm.model.init_params(shape_check, 0);
    for (const auto& [name, t] : shape_check.entries()) {
        if (!lm.store.has(name))
            throw std::runtime_error("checkpoint " + checkpoint_path + " lacks parameter " + name);
        if (lm.store.get(name).shape() != t.shape())
            throw std::runtime_error("checkpoint parameter shape mismatch: " + name);
    }
    return lm;
}

// ------------------------------------------------------------ evaluation

namespace {

// record-parallel map over a read-only parameter snapshot; exceptions
// from worker iterations are rethrown on the calling thread
template <class F>
void parallel_records(int n, F&& body) {
    std::exception_ptr err = nullptr;
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic) if (n > 1)
    for (int i = 0; i < n; ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            body(i);
        } catch (...) {
#pragma omp critical
            {
                if (!failed.exchange(true)) err = std::current_exception();
            }
        }
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace

double classify_slot_accuracy(const Model& model, const ParamStore& store,
                              const std::vector<InstructionExample>& examples,
                              std::array<double, kSlotCount>* per_slot) {
    std::array<std::atomic<size_t>, kSlotCount> hits{};
    const int n = static_cast<int>(examples.size());
    std::vector<std::array<int, kSlotCount>> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        labels[static_cast<size_t>(i)] = model.slot_labels(examples[static_cast<size_t>(i)]);
    parallel_records(n, [&](int i) {
        const ContextTokens ctx = model.build_context(store, examples[static_cast<size_t>(i)]);
        auto ranked = predict_slots_topk(store, model.decoder(), model.heads(), ctx, 1);
        for (int s = 0; s < kSlotCount; ++s)
            if (ranked[static_cast<size_t>(s)][0] ==
                labels[static_cast<size_t>(i)][static_cast<size_t>(s)])
                ++hits[static_cast<size_t>(s)];
    });
    double total = 0.0;
    for (int s = 0; s < kSlotCount; ++s) {
        const double acc = examples.empty()
                               ? 0.0
                               : static_cast<double>(hits[static_cast<size_t>(s)]) /
                                     static_cast<double>(examples.size());
        if (per_slot) (*per_slot)[static_cast<size_t>(s)] = acc;
        total += acc;
    }
    return total / kSlotCount;
}

double generate_exact_match(const Model& model, const ParamStore& store,
                            const std::vector<InstructionExample>& examples) {
    std::atomic<size_t> hits{0};
    const int n = static_cast<int>(examples.size());
    parallel_records(n, [&](int i) {
        const auto& ex = examples[static_cast<size_t>(i)];
        const ContextTokens ctx = model.build_context(store, ex);
        const auto tokens =
            greedy_decode(store, model.decoder(), ctx, model.config().max_answer_tokens);
        if (model.token_vocab().decode(tokens) == ex.answer) ++hits;
    });
    return examples.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(examples.size());
}

MetricReport evaluate(const EvalOptions& opts) {
    LoadedModel lm = load_model(opts.checkpoint);
    const auto examples = read_examples_jsonl(opts.data_jsonl);
    const ConditionGrouping grouping = opts.groups_file.empty()
                                           ? ConditionGrouping::builtin_defaults()
                                           : ConditionGrouping::from_file(opts.groups_file);
    int max_k = 1;
    for (int k : opts.ks) max_k = std::max(max_k, k);
    const int max_len = opts.max_len > 0 ? opts.max_len : lm.model.config().max_answer_tokens;

    MetricReport report;
    report.model = opts.model_name;
    report.record_count = examples.size();

    if (lm.task == Task::Classify) {
        for (const auto& ex : examples)
            if (!ex.slots)
                throw std::runtime_error("classification evaluation needs slot labels: " + ex.id);
        const int n = static_cast<int>(examples.size());
        std::vector<std::array<std::vector<std::string>, kSlotCount>> preds(
            static_cast<size_t>(n));
        std::vector<std::array<std::string, kSlotCount>> truths(static_cast<size_t>(n));
        parallel_records(n, [&](int i) {
            const auto& ex = examples[static_cast<size_t>(i)];
            const ContextTokens ctx = lm.model.build_context(lm.store, ex);
            const Tensor pooled = lm.model.decoder().pooled_context_state(lm.store, ctx);
            const auto logits = lm.model.heads().slot_logits(lm.store, pooled);
            // k may exceed a small slot vocabulary; rank what exists and
            // pad with a non-label so strict matching can never hit it
            std::array<std::vector<std::string>, kSlotCount> ranked_labels;
            for (int s = 0; s < kSlotCount; ++s) {
                auto order = rank_logits_row(logits[static_cast<size_t>(s)]);
                if (static_cast<int>(order.size()) > max_k) order.resize(static_cast<size_t>(max_k));
                for (int idx : order)
                    ranked_labels[static_cast<size_t>(s)].push_back(
                        lm.model.cond_vocab().label(s, idx));
                while (static_cast<int>(ranked_labels[static_cast<size_t>(s)].size()) < max_k)
                    ranked_labels[static_cast<size_t>(s)].push_back("<none-of-vocab>");
            }
            preds[static_cast<size_t>(i)] = std::move(ranked_labels);
            truths[static_cast<size_t>(i)] = *ex.slots;
        });
        const auto acc = topk_strict(preds, truths, opts.ks);
        for (int s = 0; s < kSlotCount; ++s)
            report.accuracy[kSlotNames[static_cast<size_t>(s)]] = acc[static_cast<size_t>(s)];
        report.accuracy["overall"][1] = overall_top1(acc);
        report.notes["overall"] =
            "mean of the five per-slot top-1 accuracies (local definition)";
    } else {
        const bool partial_mode = !opts.partial_role.empty();
        if (partial_mode)
            for (const auto& ex : examples)
                if (!ex.slots)
                    throw std::runtime_error(
                        "partial-match evaluation needs slot-flavor truth labels");
        std::vector<std::string> lenient_common;
        if (partial_mode && !opts.lenient_common_file.empty()) {
            std::ifstream is(opts.lenient_common_file);
            if (!is)
                throw std::runtime_error("cannot open common-solvent list: " +
                                         opts.lenient_common_file);
            std::string line;
            while (std::getline(is, line)) {
                const size_t hash = line.find('#');
                if (hash != std::string::npos) line.erase(hash);
                while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
                    line.pop_back();
                if (!line.empty()) lenient_common.push_back(line);
            }
        }
        const int n = static_cast<int>(examples.size());
        std::vector<std::vector<std::string>> cands(static_cast<size_t>(n));
        std::vector<std::string> truths(static_cast<size_t>(n));
        std::vector<int> partial_hits(static_cast<size_t>(n), 0);
        std::atomic<size_t> incomplete{0};
        parallel_records(n, [&](int i) {
            const auto& ex = examples[static_cast<size_t>(i)];
            const ContextTokens ctx = lm.model.build_context(lm.store, ex);
            auto beams = beam_search_topk(lm.store, lm.model.decoder(), lm.model.token_vocab(),
                                          ctx, max_k, std::max(opts.beam_width, max_k), max_len);
            if (beams.incomplete) ++incomplete;
            std::vector<std::string> texts;
            for (const auto& c : beams.candidates) texts.push_back(c.text);
            if (partial_mode) {
                std::vector<std::string> truth_species;
                for (int s = 0; s < kSlotCount; ++s) {
                    const auto& label = (*ex.slots)[static_cast<size_t>(s)];
                    if (label != kNoneLabel)
                        for (const auto& sp : grouping.split(label)) truth_species.push_back(sp);
                }
                const std::string top1 = texts.empty() ? "" : texts[0];
                partial_hits[static_cast<size_t>(i)] =
                    partial_match(top1, truth_species, grouping,
                                  lenient_common.empty() ? nullptr : &lenient_common)
                        ? 1
                        : 0;
            } else {
                truths[static_cast<size_t>(i)] = ex.answer;
            }
            cands[static_cast<size_t>(i)] = std::move(texts);
        });
        if (partial_mode) {
            double acc = 0.0;
            for (int h : partial_hits) acc += h;
            report.accuracy["partial_" + opts.partial_role][1] =
                partial_hits.empty() ? 0.0 : acc / static_cast<double>(partial_hits.size());
            report.notes["partial"] =
                "top-1 partial match: every predicted species belongs to the truth condition set";
            if (!lenient_common.empty())
                report.notes["partial_lenient"] =
                    "lenient mode: species from the common-solvent list are exempt";
        } else {
            report.accuracy["sequence"] = topk_sequence(cands, truths, opts.ks, grouping);
        }
        if (incomplete > 0)
            report.notes["incomplete_beams"] =
                std::to_string(incomplete.load()) + " records returned fewer than k finished beams";
    }
    emit_report(report, opts.out_json, opts.out_csv);
    return report;
}

// ---------------------------------------------------------- recommend

std::vector<std::pair<std::string, double>> recommend(const RecommendOptions& opts) {
    LoadedModel lm = load_model(opts.checkpoint);
    ReactionRecord record = make_record("query", opts.reaction);
    if (lm.task == Task::Classify)
        record.slots = {{kNoneLabel, kNoneLabel, kNoneLabel, kNoneLabel, kNoneLabel}};
    else
        record.joined_conditions = "?";
    InstructionExample ex = render_prompt(record, builtin_templates()[0], 0);
    ex.answer.clear();
    const ContextTokens ctx = lm.model.build_context(lm.store, ex);
    const int max_len = opts.max_len > 0 ? opts.max_len : lm.model.config().max_answer_tokens;

    std::vector<std::pair<std::string, double>> ranked;
    if (lm.task == Task::Classify) {
        int slot = -1;
        for (int s = 0; s < kSlotCount; ++s)
            if (opts.role == kSlotNames[static_cast<size_t>(s)]) slot = s;
        if (slot < 0)
            throw std::invalid_argument(
                "recommend: --role must name a condition slot (catalyst, solvent1, solvent2, "
                "reagent1, reagent2)");
        const Tensor pooled = lm.model.decoder().pooled_context_state(lm.store, ctx);
        const Tensor logits = lm.model.heads().slot_logits(lm.store, pooled)[static_cast<size_t>(slot)];
        if (!opts.candidates.empty()) {
            // restricted softmax over the candidate subset
            std::vector<std::pair<int, std::string>> cand_ids;
            for (const auto& c : opts.candidates) {
                const auto idx = lm.model.cond_vocab().lookup(slot, c);
                if (!idx)
                    throw std::invalid_argument("candidate '" + c +
                                                "' is not in the classification vocabulary");
                cand_ids.push_back({*idx, c});
            }
            double mx = -1e300;
            for (const auto& [idx, _] : cand_ids) mx = std::max(mx, logits.at(0, idx));
            double z = 0.0;
            for (const auto& [idx, _] : cand_ids) z += std::exp(logits.at(0, idx) - mx);
            for (const auto& [idx, name] : cand_ids)
                ranked.push_back({name, std::exp(logits.at(0, idx) - mx) / z});
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
        } else {
            auto order = rank_logits_row(logits);
            const int k = std::min(opts.k, lm.model.cond_vocab().slot_size(slot));
            order.resize(static_cast<size_t>(k));
            // softmax over the full slot for a probability readout
            double mx = -1e300;
            for (int i = 0; i < logits.dim(1); ++i) mx = std::max(mx, logits.at(0, i));
            double z = 0.0;
            for (int i = 0; i < logits.dim(1); ++i) z += std::exp(logits.at(0, i) - mx);
            for (int idx : order)
                ranked.push_back({lm.model.cond_vocab().label(slot, idx),
                                  std::exp(logits.at(0, idx) - mx) / z});
        }
    } else {
        if (!opts.candidates.empty()) {
            for (const auto& c : opts.candidates) {
                const auto target = lm.model.token_vocab().encode_answer(c);
                ranked.push_back(
                    {c, sequence_score(lm.store, lm.model.decoder(), ctx, target)});
            }
            std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
        } else {
            auto beams = beam_search_topk(lm.store, lm.model.decoder(), lm.model.token_vocab(),
                                          ctx, opts.k, std::max(opts.beam_width, opts.k), max_len);
            for (const auto& c : beams.candidates) ranked.push_back({c.text, c.score});
        }
    }
    return ranked;
}

// ------------------------------------------------------------ check-grad

SuiteReport run_full_gradient_suite(uint64_t seed) {
    SuiteReport rep = run_op_gradient_suite(seed, 20);

    // composed model at f64, every parameter sampled at a few coordinates
    const Dtype saved = default_dtype();
    set_default_dtype(Dtype::F64);
    try {
        for (Task task : {Task::Classify, Task::Generate}) {
            FixtureSpec spec;
            spec.records = 2;
            spec.seed = seed;
            spec.generation = task == Task::Generate;
            const auto records = make_synthetic_records(spec);
            auto examples = build_qa_dataset(records, builtin_templates(), seed);
            auto [cond, tok] = build_vocabs_from_examples(examples);
            ModelConfig mc;
            mc.enc_width = 8;
            mc.enc_layers = 1;
            mc.enc_heads = 2;
            mc.enc_max_len = 24;
            mc.graph_hidden = 8;
            mc.graph_layers = 1;
            mc.graph_width = 8;
            mc.llm_width = 8;
            mc.dec_layers = 1;
            mc.dec_heads = 2;
            mc.dec_ffn_mult = 2;
            mc.smiles_tokens = 6;
            mc.graph_tokens = 2;
            mc.proj_heads = 2;
            mc.proj_tower = 1;
            mc.max_question_tokens = 32;
            mc.max_answer_tokens = 16;
            Model model(mc, std::move(cond), std::move(tok));
            ParamStore store;
            model.init_params(store, seed);
            Rng rng(seed);
            std::vector<Tensor> params;
            for (auto& [name, t] : store.entries()) params.push_back(t);
            auto res = check_gradients(
                [&](const std::vector<Tensor>&) {
                    Tensor a = model.example_loss(store, examples[0], task);
                    Tensor b = model.example_loss(store, examples[1], task);
                    return scale(add(a, b), 0.5);
                },
                params, 1e-5, 1e-4, 2, &rng);
            rep.add({std::string("composed_model_") + task_name(task), res.max_rel_err, res.pass});
        }
    } catch (...) {
        set_default_dtype(saved);
        throw;
    }
    set_default_dtype(saved);
    return rep;
}

// -------------------------------------------------------------- fixtures

std::vector<ReactionRecord> make_synthetic_records(const FixtureSpec& spec) {
    static const char* kFragments[] = {"CC",      "CCO",    "c1ccccc1", "CC(C)O", "CCN",
                                       "C=O",     "CC#N",   "CBr",      "C1CCOC1", "CC(=O)O",
                                       "c1ccncc1", "CC(C)C", "OCCO",    "CSC"};
    static const char* kCatalystPool[] = {"[Pd]", "[Zn]", "[Fe]", "[Cu]",
                                          "[Ni]", "[Pt]", "[Rh]", "[Ru]"};
    static const char* kSolventPool[] = {"O", "CO", "CCO", "C1CCOC1", "CC#N", "ClCCl"};
    static const char* kReagentPool[] = {"[Na+].[OH-]", "[K+].[OH-]",   "CC(=O)O",
                                         "N",           "[Cl-].[NH4+]", "CC(C)[O-]",
                                         "[BH4-]",      "OS(=O)(=O)O",  "[H][H]",
                                         "CC(C)(C)[O-]"};
    if (spec.catalysts > 8 || spec.solvents > 6 || spec.reagents > 10)
        throw std::invalid_argument("fixture pools support at most 8/6/10 labels");

    Rng rng(mix_seed(spec.seed, 0xf1c));
    std::set<std::string> seen;
    std::vector<ReactionRecord> out;
    const int nfrag = static_cast<int>(sizeof(kFragments) / sizeof(kFragments[0]));
    while (static_cast<int>(out.size()) < spec.records) {
        std::string lhs = kFragments[rng.index(static_cast<size_t>(nfrag))];
        if (rng.uniform() < 0.6) lhs += "." + std::string(kFragments[rng.index(static_cast<size_t>(nfrag))]);
        const std::string rxn = lhs + ">>" + kFragments[rng.index(static_cast<size_t>(nfrag))];
        if (!seen.insert(rxn).second) continue;  // keep reactions unique so they are learnable
        ReactionRecord rec = make_record("fx" + std::to_string(out.size()), rxn);
        const char* solvent_for_corpus = kSolventPool[rng.index(static_cast<size_t>(spec.solvents))];
        rec.corpus = std::string("The mixture was stirred in ") + solvent_for_corpus +
                     " at room temperature and worked up as usual.";
        if (spec.generation) {
            const int n_species = 1 + rng.index(3);
            std::string joined;
            for (int i = 0; i < n_species; ++i) {
                if (i) joined += '.';
                joined += kReagentPool[rng.index(static_cast<size_t>(spec.reagents))];
            }
            rec.joined_conditions = joined;
            rec.condition_species = ConditionGrouping::builtin_defaults().split(joined);
        } else {
            std::array<std::string, kSlotCount> slots;
            slots[0] = rng.uniform() < 0.75
                           ? kCatalystPool[rng.index(static_cast<size_t>(spec.catalysts))]
                           : kNoneLabel;
            slots[1] = kSolventPool[rng.index(static_cast<size_t>(spec.solvents))];
            slots[2] = rng.uniform() < 0.4
                           ? kSolventPool[rng.index(static_cast<size_t>(spec.solvents))]
                           : kNoneLabel;
            slots[3] = kReagentPool[rng.index(static_cast<size_t>(spec.reagents))];
            slots[4] = rng.uniform() < 0.35
                           ? kReagentPool[rng.index(static_cast<size_t>(spec.reagents))]
                           : kNoneLabel;
            rec.slots = slots;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace rxncond
