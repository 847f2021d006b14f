#include "mhqa/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include "mhqa/checkpoint.hpp"
#include "mhqa/errors.hpp"

namespace mhqa {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const PrerequisiteError*>(&e) != nullptr) {
        return 2;
    }
    if (dynamic_cast<const ValidationError*>(&e) != nullptr || dynamic_cast<const ParseError*>(&e) != nullptr ||
        dynamic_cast<const AlignmentError*>(&e) != nullptr) {
        return 1;
    }
    return 3;
}

namespace {

void log(const std::string& stage, const std::string& message) {
    std::cerr << "[" << stage << "] " << message << '\n';
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& r : rows) {
        out << r.dump() << '\n';
    }
    if (!out) {
        throw Error("cannot write " + path.string());
    }
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw PrerequisiteError("cannot read " + path.string());
    }
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw CorruptionError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

std::string bridge_checkpoint_for(const std::string& mode) {
    if (mode == "no_context_evidence" || mode == "no_content_evidence") {
        return "bridge_" + mode;
    }
    if (mode == "no_bridge_reasoner" || mode == "oracle_gold_passage" || mode == "oracle_full_support") {
        return "";
    }
    return "bridge_full";
}

// Oracle modes read differently shaped contexts, so each gets a reader
// trained on that shape.
std::string reader_checkpoint_for(const std::string& mode) {
    if (mode == "no_multitask" || mode == "oracle_gold_passage" || mode == "oracle_full_support") {
        return "reader_" + mode;
    }
    return "reader";
}

std::vector<const Passage*> support_passages(const Corpus& corpus, const QARecord& q) {
    std::vector<const Passage*> out;
    for (const auto& t : q.supporting_titles.value_or(std::vector<std::string>{})) {
        if (const Passage* p = corpus.find_title(t)) {
            out.push_back(p);
        }
    }
    return out;
}

BridgeVariant variant_for(const std::string& mode) {
    if (mode == "no_context_evidence") {
        return BridgeVariant::no_context_evidence;
    }
    if (mode == "no_content_evidence") {
        return BridgeVariant::no_content_evidence;
    }
    return BridgeVariant::full;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)), out_(config_.output_dir) {
    validate(config_);
}

const std::vector<std::string>& Pipeline::stage_names() {
    static const std::vector<std::string> names = {"ingest",        "build-index",  "derive-labels", "train-bridge",
                                                   "cross-predict", "train-reader", "predict",       "evaluate"};
    return names;
}

void Pipeline::run_stage(const std::string& stage) {
    if (stage == "ingest") {
        ingest();
    } else if (stage == "build-index") {
        build_index();
    } else if (stage == "derive-labels") {
        derive_labels();
    } else if (stage == "train-bridge") {
        train_bridge();
    } else if (stage == "cross-predict") {
        cross_predict();
    } else if (stage == "train-reader") {
        train_reader();
    } else if (stage == "predict") {
        predict();
    } else if (stage == "evaluate") {
        evaluate();
    } else {
        throw ValidationError("unknown stage '" + stage + "'");
    }
}

void Pipeline::run_all() {
    for (const auto& s : stage_names()) {
        run_stage(s);
    }
}

// ---- lazily loaded inputs -------------------------------------------------

const Corpus& Pipeline::corpus() {
    if (!corpus_) {
        if (config_.corpus.empty()) {
            throw ValidationError("config key 'corpus' is not set");
        }
        corpus_ = load_corpus(config_.corpus);
    }
    return *corpus_;
}

const std::vector<QARecord>& Pipeline::train_questions() {
    if (!train_) {
        if (config_.train_questions.empty()) {
            throw ValidationError("config key 'train_questions' is not set");
        }
        train_ = load_questions(config_.train_questions);
    }
    return *train_;
}

const std::vector<QARecord>& Pipeline::dev_questions() {
    if (!dev_) {
        if (config_.dev_questions.empty()) {
            throw ValidationError("config key 'dev_questions' is not set");
        }
        dev_ = load_questions(config_.dev_questions);
    }
    return *dev_;
}

const Vocabulary& Pipeline::vocab() {
    if (!vocab_) {
        vocab_ = Vocabulary::load(path("vocab.txt"));
    }
    return *vocab_;
}

const InvertedIndex& Pipeline::index() {
    if (!index_) {
        index_ = mhqa::build_index(corpus());
    }
    return *index_;
}

const WordVectors* Pipeline::word_vectors() {
    if (!vectors_loaded_) {
        if (!config_.embeddings.empty()) {
            vectors_ = load_word_vectors(config_.embeddings);
            if (vectors_->dim != config_.embed_dim) {
                throw ValidationError("embedding file has dimension " + std::to_string(vectors_->dim) +
                                      " but embed_dim is " + std::to_string(config_.embed_dim));
            }
        }
        vectors_loaded_ = true;
    }
    return vectors_ ? &*vectors_ : nullptr;
}

void Pipeline::require(const std::string& file, const std::string& hint) const {
    if (!fs::exists(path(file))) {
        throw PrerequisiteError(hint);
    }
}

BridgeConfig Pipeline::bridge_config(BridgeVariant variant) const {
    BridgeConfig c;
    c.span = {config_.embed_dim, config_.hidden, config_.dropout};
    c.abstract_hidden = config_.abstract_hidden;
    c.variant = variant;
    c.max_context_tokens = config_.max_context_tokens;
    return c;
}

ReaderConfig Pipeline::reader_config(double aux_weight) const {
    ReaderConfig c;
    c.span = {config_.embed_dim, config_.hidden, config_.dropout};
    c.max_span_len = config_.max_span_len;
    c.max_context_tokens = config_.max_context_tokens;
    c.aux_weight = aux_weight;
    return c;
}

StartPassages Pipeline::retrieve(const QARecord& q) {
    StartPassages sp;
    RetrievalParams params{config_.k1, config_.b, config_.lambda};
    std::vector<const Passage*> start;
    for (const auto& r : retrieve_start_passages(index(), tokenize(q.question), config_.k, params)) {
        sp.retrieved.push_back(r.passage_id);
        start.push_back(corpus().find_id(r.passage_id));
    }
    if (!linker_) {
        linker_ = std::make_unique<ExactTitleLinker>(corpus());
    }
    std::vector<std::string> warnings;
    for (const Passage* p : expand_with_entity_linking(q.question, start, linker_.get(), corpus(), config_.top_n_el,
                                                       &warnings)) {
        sp.linked.push_back(p->id);
    }
    for (const auto& w : warnings) {
        log("retrieval", q.id + ": " + w);
    }
    return sp;
}

const std::map<std::string, StartPassages>& Pipeline::retrieval_cache() {
    if (!retrieval_) {
        require("retrieval.jsonl", "retrieval results not found; run build-index");
        std::map<std::string, StartPassages> cache;
        for (const auto& row : read_jsonl(path("retrieval.jsonl"))) {
            StartPassages sp;
            sp.retrieved = row.at("retrieved").get<std::vector<std::string>>();
            sp.linked = row.at("linked").get<std::vector<std::string>>();
            cache[row.at("qid").get<std::string>()] = std::move(sp);
        }
        retrieval_ = std::move(cache);
    }
    return *retrieval_;
}

std::vector<const Passage*> Pipeline::start_passages(const QARecord& q, bool with_linking) {
    const auto& cache = retrieval_cache();
    auto it = cache.find(q.id);
    const StartPassages sp = it != cache.end() ? it->second : retrieve(q);
    std::vector<const Passage*> out;
    for (const auto& id : sp.retrieved) {
        out.push_back(corpus().find_id(id));
    }
    if (with_linking) {
        for (const auto& id : sp.linked) {
            out.push_back(corpus().find_id(id));
        }
    }
    if (std::find(out.begin(), out.end(), nullptr) != out.end()) {
        throw CorruptionError("retrieval results name a passage missing from the corpus; rerun build-index");
    }
    return out;
}

LabelSet Pipeline::load_labels(const std::string& split) const {
    const std::string file = "labels_" + split + ".jsonl";
    if (!fs::exists(path(file))) {
        throw PrerequisiteError("bridge labels not found; run derive-labels");
    }
    LabelSet set;
    for (const auto& row : read_jsonl(path(file))) {
        set.labels.push_back({row.at("qid"), row.at("gold_title")});
    }
    return set;
}

// ---- manifest -------------------------------------------------------------

json Pipeline::load_manifest() const {
    if (fs::exists(path("manifest.json"))) {
        std::ifstream in(path("manifest.json"));
        try {
            return json::parse(in);
        } catch (const json::exception& e) {
            throw CorruptionError("manifest.json is not valid JSON: " + std::string(e.what()));
        }
    }
    return {{"stages", json::object()}, {"checkpoints", json::object()}};
}

void Pipeline::save_manifest(const json& manifest) const {
    std::ofstream out(path("manifest.json"), std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) {
        throw Error("cannot write manifest.json");
    }
}

void Pipeline::record_stage(const std::string& key, const std::vector<std::string>& outputs, const json& info) {
    json manifest = load_manifest();
    manifest["config"] = to_json(config_);
    manifest["effective_mode"] = config_.effective_mode();
    json outs = json::object();
    for (const auto& o : outputs) {
        outs[o] = sha256_file(path(o));
        // An artifact belongs to exactly one stage entry.
        for (auto& [name, entry] : manifest["stages"].items()) {
            if (name != key && entry.contains("outputs")) {
                entry["outputs"].erase(o);
            }
        }
    }
    manifest["stages"][key] = {{"completed_at", timestamp()}, {"outputs", outs}, {"info", info}};
    save_manifest(manifest);
}

// ---- stages ----------------------------------------------------------------

void Pipeline::ingest() {
    fs::create_directories(out_);
    const Corpus& c = corpus();
    const auto& train = train_questions();
    const auto& dev = dev_questions();
    word_vectors();  // fail early on a malformed embedding file
    Vocabulary v = build_vocabulary(c, {train, dev});
    v.save(path("vocab.txt"));
    vocab_ = std::move(v);
    std::size_t anchors = 0, dangling = 0;
    for (const auto& p : c.passages()) {
        anchors += p.anchors.size();
        for (const auto& a : p.anchors) {
            dangling += c.find_title(a.target_title) == nullptr ? 1 : 0;
        }
    }
    const json info = {{"passages", c.size()},        {"anchors", anchors},         {"dangling_anchors", dangling},
                       {"train_questions", train.size()}, {"dev_questions", dev.size()}, {"vocab_size", vocab_->size()}};
    {
        std::ofstream out(path("ingest.json"));
        out << info.dump(2) << '\n';
    }
    record_stage("ingest", {"vocab.txt", "ingest.json"}, info);
    log("ingest", std::to_string(c.size()) + " passages, " + std::to_string(train.size()) + " train / " +
                      std::to_string(dev.size()) + " dev questions");
}

void Pipeline::build_index() {
    require("vocab.txt", "vocabulary not found; run ingest");
    std::vector<json> rows;
    for (const auto* split : {"train", "dev"}) {
        const auto& qs = std::string(split) == "train" ? train_questions() : dev_questions();
        for (const auto& q : qs) {
            const StartPassages sp = retrieve(q);
            rows.push_back({{"qid", q.id}, {"split", split}, {"retrieved", sp.retrieved}, {"linked", sp.linked}});
        }
    }
    write_jsonl(path("retrieval.jsonl"), rows);
    retrieval_.reset();
    const auto& idx = index();
    record_stage("build-index", {"retrieval.jsonl"},
                 {{"documents", idx.num_docs}, {"body_terms", idx.body.postings.size()}, {"k", config_.k}});
    log("build-index", "retrieved start passages for " + std::to_string(rows.size()) + " questions");
}

void Pipeline::derive_labels() {
    require("vocab.txt", "vocabulary not found; run ingest");
    std::vector<std::string> outputs;
    json info = json::object();
    for (const auto* split : {"train", "dev"}) {
        const auto& qs = std::string(split) == "train" ? train_questions() : dev_questions();
        const LabelSet set = derive_bridge_labels(qs, corpus(), config_.seed);
        std::vector<json> rows, skipped;
        for (const auto& l : set.labels) {
            rows.push_back({{"qid", l.question_id}, {"gold_title", l.gold_title}});
        }
        for (const auto& s : set.skipped) {
            skipped.push_back({{"qid", s.question_id}, {"reason", s.reason}});
        }
        const std::string base = std::string("labels_") + split;
        write_jsonl(path(base + ".jsonl"), rows);
        write_jsonl(path(base + "_skipped.jsonl"), skipped);
        outputs.push_back(base + ".jsonl");
        outputs.push_back(base + "_skipped.jsonl");
        info[split] = {{"labeled", rows.size()}, {"skipped", skipped.size()}};
        log("derive-labels", std::string(split) + ": " + std::to_string(rows.size()) + " labeled, " +
                                 std::to_string(skipped.size()) + " skipped");
    }
    record_stage("derive-labels", outputs, info);
}

Pipeline::TrainedReasoner Pipeline::train_reasoner(const std::string& name, BridgeVariant variant,
                                                   const std::vector<std::string>& qids) {
    const LabelSet labels = load_labels("train");
    const std::set<std::string> allowed(qids.begin(), qids.end());
    BridgeReasoner reasoner(bridge_config(variant));
    std::vector<BridgeExample> examples;
    std::map<std::string, std::size_t> skipped;
    for (const auto& q : train_questions()) {
        if (allowed.count(q.id) == 0) {
            continue;
        }
        const BridgeLabel* label = labels.find(q.id);
        if (label == nullptr) {
            continue;
        }
        BridgeInstance inst =
            reasoner.prepare(q.id, q.question, start_passages(q, config_.linking_enabled()), corpus(), vocab());
        if (gold_candidates(inst.candidates, label->gold_title).empty()) {
            ++skipped["gold bridge not among candidates"];
            continue;
        }
        examples.push_back({std::move(inst), label->gold_title});
    }
    if (examples.empty()) {
        throw ValidationError("no trainable bridge examples for " + name);
    }

    nc::ParamStore store;
    Rng init(mix_seed(config_.seed, "init:" + name));
    reasoner.init_params(store, vocab(), word_vectors(), init);
    if (config_.freeze_embeddings) {
        store.get(BridgeReasoner::kEmbedding).trainable = false;
    }
    TrainOptions opts;
    opts.epochs = config_.bridge_epochs;
    opts.batch_size = config_.batch_size;
    opts.lr = config_.lr;
    opts.dropout = config_.dropout;
    opts.seed = mix_seed(config_.seed, "train:" + name);
    const auto history = mhqa::train_bridge(reasoner, store, examples, opts, [&](std::size_t epoch, double loss) {
        if ((epoch + 1) % 10 == 0 || epoch + 1 == opts.epochs) {
            log("train-bridge", name + " epoch " + std::to_string(epoch + 1) + "/" + std::to_string(opts.epochs) +
                                    " loss " + std::to_string(loss));
        }
    });

    std::size_t hits1 = 0;
    std::vector<std::string> trained_on;
    for (const auto& ex : examples) {
        trained_on.push_back(ex.instance.question_id);
        const auto ranked = rank_answer_passages(reasoner.score_bridges(store, ex.instance), 1);
        hits1 += (!ranked.empty() && ranked[0].title == ex.gold_title) ? 1 : 0;
    }
    std::sort(trained_on.begin(), trained_on.end());
    const json meta = {{"name", name}, {"variant", to_string(variant)}, {"trained_on", trained_on}};
    const std::string sha = save_checkpoint(store, path("checkpoints/" + name), meta);
    json skip_info = json::object();
    for (const auto& [reason, n] : skipped) {
        skip_info[reason] = n;
    }
    const json info = {{"examples", examples.size()},
                       {"skipped", skip_info},
                       {"epochs", opts.epochs},
                       {"final_loss", history.empty() ? 0.0 : history.back()},
                       {"train_hits@1", static_cast<double>(hits1) / static_cast<double>(examples.size())}};
    log("train-bridge", name + " train Hits@1 " + std::to_string(info["train_hits@1"].get<double>()));
    return {sha, trained_on, info};
}

void Pipeline::train_bridge() {
    require("retrieval.jsonl", "retrieval results not found; run build-index");
    require("labels_train.jsonl", "bridge labels not found; run derive-labels");
    const std::string mode = config_.effective_mode();
    const BridgeVariant variant = variant_for(mode);
    const std::string name = "bridge_" + to_string(variant);
    std::vector<std::string> all;
    for (const auto& q : train_questions()) {
        all.push_back(q.id);
    }
    const TrainedReasoner trained = train_reasoner(name, variant, all);
    json manifest = load_manifest();
    manifest["checkpoints"][name] = {{"manifest_sha256", trained.checkpoint_sha256}, {"trained_on", trained.trained_on}};
    save_manifest(manifest);
    record_stage("train-bridge:" + name, {"checkpoints/" + name + "/manifest.json"}, trained.info);
}

std::vector<std::string> Pipeline::rank_for(const BridgeReasoner& reasoner, nc::ParamStore& store, const QARecord& q,
                                            bool with_linking, json* candidate_dump) {
    const BridgeInstance inst = reasoner.prepare(q.id, q.question, start_passages(q, with_linking), corpus(), vocab());
    std::vector<RankedPassage> ranked;
    if (!inst.candidates.empty()) {
        const auto scored = reasoner.score_bridges(store, inst);
        if (candidate_dump != nullptr) {
            json cands = json::array();
            for (const auto& r : rank_answer_passages(scored, scored.size())) {
                cands.push_back({{"title", r.title}, {"score", r.score}});
            }
            *candidate_dump = {{"qid", q.id}, {"candidates", cands}};
        }
        ranked = rank_answer_passages(scored, config_.k);
    } else if (candidate_dump != nullptr) {
        *candidate_dump = {{"qid", q.id}, {"candidates", json::array()}};
    }
    return titles_of(ranked);
}

void Pipeline::cross_predict() {
    require("retrieval.jsonl", "retrieval results not found; run build-index");
    require("labels_train.jsonl", "bridge labels not found; run derive-labels");
    std::vector<std::string> all;
    for (const auto& q : train_questions()) {
        all.push_back(q.id);
    }
    const FoldSplit split = split_folds(all, config_.seed);
    json manifest_folds = {{"fold0", split.folds[0]}, {"fold1", split.folds[1]}};
    {
        std::ofstream out(path("folds.json"));
        out << manifest_folds.dump(2) << '\n';
    }

    std::vector<json> rows;
    std::vector<std::string> outputs = {"folds.json"};
    json info = json::object();
    for (int f = 0; f < 2; ++f) {
        const std::string name = "bridge_fold" + std::to_string(f);
        const TrainedReasoner trained = train_reasoner(name, BridgeVariant::full, split.folds[f]);
        json manifest = load_manifest();
        manifest["checkpoints"][name] = {{"manifest_sha256", trained.checkpoint_sha256},
                                         {"trained_on", trained.trained_on},
                                         {"fold", f}};
        manifest["folds"] = manifest_folds;
        save_manifest(manifest);
        outputs.push_back("checkpoints/" + name + "/manifest.json");
        info[name] = trained.info;

        // Reload from disk so cross predictions use exactly the stored weights.
        auto loaded = load_checkpoint(path("checkpoints/" + name));
        BridgeReasoner reasoner(bridge_config(BridgeVariant::full));
        const std::set<std::string> held_out(split.folds[1 - f].begin(), split.folds[1 - f].end());
        for (const auto& q : train_questions()) {
            if (q.qtype != QuestionType::bridge || held_out.count(q.id) == 0) {
                continue;
            }
            const auto ranked = rank_for(reasoner, loaded.store, q, config_.linking_enabled(), nullptr);
            rows.push_back({{"qid", q.id}, {"reasoner", name}, {"reasoner_fold", f}, {"passages", ranked}});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) { return a["qid"] < b["qid"]; });
    write_jsonl(path("cross_predictions.jsonl"), rows);
    outputs.push_back("cross_predictions.jsonl");
    record_stage("cross-predict", outputs, info);
    log("cross-predict", "cross-predicted passages for " + std::to_string(rows.size()) + " bridge questions");
}

void Pipeline::train_reader() {
    require("cross_predictions.jsonl", "cross predictions not found; run cross-predict");
    const std::string mode = config_.effective_mode();
    const std::string name = reader_checkpoint_for(mode);
    const double aux = mode == "no_multitask" ? 0.0 : config_.aux_weight;
    const bool oracle = mode == "oracle_gold_passage" || mode == "oracle_full_support";

    std::map<std::string, json> cross;
    for (const auto& row : read_jsonl(path("cross_predictions.jsonl"))) {
        cross[row.at("qid").get<std::string>()] = row;
    }
    const LabelSet labels = load_labels("train");
    std::map<std::string, std::vector<const Passage*>> passages;
    std::map<std::string, std::string> source;
    for (const auto& q : train_questions()) {
        auto it = cross.find(q.id);
        std::vector<const Passage*> chosen;
        if (oracle) {
            const BridgeLabel* label = labels.find(q.id);
            if (mode == "oracle_gold_passage" && label != nullptr) {
                chosen.push_back(corpus().find_title(label->gold_title));
            } else {
                chosen = support_passages(corpus(), q);
            }
            source[q.id] = "oracle";
        } else if (q.qtype == QuestionType::bridge && it != cross.end()) {
            for (const auto& t : it->second.at("passages")) {
                chosen.push_back(corpus().find_title(t.get<std::string>()));
            }
            source[q.id] = it->second.at("reasoner").get<std::string>();
        }
        if (chosen.empty()) {
            chosen = start_passages(q, config_.linking_enabled());
            source[q.id] = "ir";
        }
        passages[q.id] = std::move(chosen);
    }
    const ReaderConfig rc = reader_config(aux);
    ReaderTrainingSet set = build_reader_training_set(train_questions(), passages, labels, vocab(), rc);
    std::vector<json> rows, skipped;
    for (const auto& ex : set.examples) {
        rows.push_back({{"qid", ex.question_id},
                        {"reasoner", source[ex.question_id]},
                        {"passages", ex.passages},
                        {"answer_span", {ex.answer_span->first, ex.answer_span->second}},
                        {"title_span", ex.title_span ? json{ex.title_span->first, ex.title_span->second} : json()}});
    }
    for (const auto& s : set.skipped) {
        skipped.push_back({{"qid", s.question_id}, {"reason", s.reason}});
    }
    if (set.examples.empty()) {
        throw ValidationError("no reader training examples: every answer was missing from its context");
    }

    Reader reader(rc);
    nc::ParamStore store;
    Rng init(mix_seed(config_.seed, "init:" + name));
    reader.init_params(store, vocab(), word_vectors(), init);
    if (config_.freeze_embeddings) {
        store.get(Reader::kEmbedding).trainable = false;
    }
    TrainOptions opts;
    opts.epochs = config_.reader_epochs;
    opts.batch_size = config_.batch_size;
    opts.lr = config_.lr;
    opts.dropout = config_.dropout;
    opts.seed = mix_seed(config_.seed, "train:" + name);
    const auto history = mhqa::train_reader(reader, store, set.examples, opts, [&](std::size_t epoch, double loss) {
        if ((epoch + 1) % 10 == 0 || epoch + 1 == opts.epochs) {
            log("train-reader", name + " epoch " + std::to_string(epoch + 1) + "/" + std::to_string(opts.epochs) +
                                    " loss " + std::to_string(loss));
        }
    });
    const std::string train_file = name == "reader" ? "reader_train.jsonl" : name + "_train.jsonl";
    const std::string skip_file = name == "reader" ? "reader_skipped.jsonl" : name + "_skipped.jsonl";
    write_jsonl(path(train_file), rows);
    write_jsonl(path(skip_file), skipped);
    const std::string sha = save_checkpoint(store, path("checkpoints/" + name), {{"name", name}, {"aux_weight", aux}});
    json manifest = load_manifest();
    manifest["checkpoints"][name] = {{"manifest_sha256", sha}, {"training_examples", train_file}};
    save_manifest(manifest);
    record_stage("train-reader:" + name, {train_file, skip_file, "checkpoints/" + name + "/manifest.json"},
                 {{"examples", rows.size()},
                  {"skipped", skipped.size()},
                  {"aux_weight", aux},
                  {"final_loss", history.empty() ? 0.0 : history.back()}});
}

void Pipeline::predict() {
    const std::string mode = config_.effective_mode();
    require("retrieval.jsonl", "retrieval results not found; run build-index");
    const std::string reader_name = reader_checkpoint_for(mode);
    const std::string bridge_name = bridge_checkpoint_for(mode);
    if (!fs::exists(path("checkpoints/" + reader_name + "/manifest.json"))) {
        throw PrerequisiteError("checkpoint " + reader_name + " not found; run train-reader" +
                                (reader_name == "reader" ? "" : " --mode " + mode));
    }
    if (!bridge_name.empty() && !fs::exists(path("checkpoints/" + bridge_name + "/manifest.json"))) {
        throw PrerequisiteError("checkpoint " + bridge_name + " not found; run train-bridge" +
                                (bridge_name == "bridge_full" ? "" : " --mode " + mode));
    }
    const bool oracle = mode == "oracle_gold_passage" || mode == "oracle_full_support";
    const LabelSet dev_labels = oracle ? load_labels("dev") : LabelSet{};

    auto reader_ckpt = load_checkpoint(path("checkpoints/" + reader_name));
    Reader reader(reader_config(0.0));
    std::optional<LoadedCheckpoint> bridge_ckpt;
    std::optional<BridgeReasoner> reasoner;
    if (!bridge_name.empty()) {
        bridge_ckpt = load_checkpoint(path("checkpoints/" + bridge_name));
        reasoner.emplace(bridge_config(variant_for(mode)));
    }
    const bool linking = config_.linking_enabled() && mode != "no_el";

    std::vector<json> rows, dumps;
    std::size_t fallbacks = 0;
    for (const auto& q : dev_questions()) {
        Prediction p;
        p.qid = q.id;
        const auto start = start_passages(q, linking);
        std::vector<const Passage*> ctx;
        if (q.qtype == QuestionType::comparison) {
            ctx = oracle ? support_passages(corpus(), q) : start;
        } else if (mode == "no_bridge_reasoner") {
            ctx = start;
            for (const auto& id : retrieval_cache().at(q.id).retrieved) {
                p.ranked.push_back(corpus().find_id(id)->title);
            }
        } else if (mode == "oracle_gold_passage") {
            if (const BridgeLabel* l = dev_labels.find(q.id)) {
                ctx.push_back(corpus().find_title(l->gold_title));
            } else {
                ctx = support_passages(corpus(), q);
            }
        } else if (mode == "oracle_full_support") {
            ctx = support_passages(corpus(), q);
        } else {
            json dump;
            p.ranked = rank_for(*reasoner, bridge_ckpt->store, q, linking, &dump);
            dumps.push_back(std::move(dump));
            for (const auto& t : p.ranked) {
                ctx.push_back(corpus().find_title(t));
            }
        }
        if (ctx.empty()) {
            ctx = start;
            p.fallback = true;
            ++fallbacks;
            log("predict", q.id + ": no candidate passages, reading the start passages instead");
        }
        if (!ctx.empty()) {
            const ReaderExample ex = make_reader_example(q.id, q.question, ctx, vocab(), config_.max_context_tokens);
            p.passages = ex.passages;
            p.answer = reader.answer(reader_ckpt.store, ex);
        }
        rows.push_back({{"qid", p.qid},
                        {"answer", p.answer},
                        {"passages", p.passages},
                        {"ranked", p.ranked},
                        {"fallback", p.fallback}});
    }
    const std::string pred_file = "predictions_" + mode + ".jsonl";
    write_jsonl(path(pred_file), rows);
    std::vector<std::string> outputs = {pred_file};
    if (!dumps.empty()) {
        const std::string cand_file = "bridge_candidates_" + mode + ".jsonl";
        write_jsonl(path(cand_file), dumps);
        outputs.push_back(cand_file);
    }
    record_stage("predict:" + mode, outputs, {{"questions", rows.size()}, {"fallbacks", fallbacks}});
    log("predict", mode + ": answered " + std::to_string(rows.size()) + " questions");
}

std::vector<Prediction> load_predictions(const fs::path& file) {
    std::vector<Prediction> out;
    for (const auto& row : read_jsonl(file)) {
        Prediction p;
        p.qid = row.at("qid");
        p.answer = row.at("answer");
        p.passages = row.at("passages").get<std::vector<std::string>>();
        p.ranked = row.value("ranked", std::vector<std::string>{});
        p.fallback = row.value("fallback", false);
        out.push_back(std::move(p));
    }
    return out;
}

MetricReport Pipeline::evaluate() {
    const std::string mode = config_.effective_mode();
    const std::string pred_file = "predictions_" + mode + ".jsonl";
    if (!fs::exists(path(pred_file))) {
        throw PrerequisiteError("predictions not found; run predict");
    }
    std::map<std::string, Prediction> preds;
    for (auto& p : load_predictions(path(pred_file))) {
        preds[p.qid] = std::move(p);
    }
    const LabelSet labels = fs::exists(path("labels_dev.jsonl")) ? load_labels("dev") : LabelSet{};
    std::vector<QuestionMetrics> rows;
    for (const auto& q : dev_questions()) {
        auto it = preds.find(q.id);
        if (it == preds.end()) {
            throw ValidationError("predictions for mode " + mode + " lack question " + q.id + "; rerun predict");
        }
        QuestionMetrics m;
        m.qid = q.id;
        m.qtype = q.qtype;
        m.prediction = it->second.answer;
        m.gold = q.answer;
        const EmF1 s = em_f1(m.prediction, m.gold);
        m.em = s.em;
        m.f1 = s.f1;
        const BridgeLabel* label = labels.find(q.id);
        if (q.qtype == QuestionType::bridge && label != nullptr && !it->second.ranked.empty()) {
            m.hits1 = hits_at_k(it->second.ranked, label->gold_title, 1);
            m.hits10 = hits_at_k(it->second.ranked, label->gold_title, 10);
        } else if (q.qtype == QuestionType::bridge && label != nullptr &&
                   (mode != "oracle_gold_passage" && mode != "oracle_full_support")) {
            m.hits1 = 0;
            m.hits10 = 0;
        }
        rows.push_back(std::move(m));
    }
    MetricReport report = make_report(mode, std::move(rows));
    const std::string stem = "metrics_" + mode;
    write_report(report, out_, stem);
    record_stage("evaluate:" + mode, {stem + ".json", stem + "_detail.jsonl"}, report_summary_json(report));
    log("evaluate", mode + ": EM " + std::to_string(report.full.em) + " F1 " + std::to_string(report.full.f1));
    return report;
}

MetricReport Pipeline::run_ablation(const std::string& mode) {
    const std::string saved = config_.mode;
    const bool saved_el = config_.entity_linking;
    config_.mode = mode;
    if (mode == "full") {
        config_.entity_linking = true;
    }
    validate(config_);
    try {
        predict();
        MetricReport r = evaluate();
        config_.mode = saved;
        config_.entity_linking = saved_el;
        return r;
    } catch (...) {
        config_.mode = saved;
        config_.entity_linking = saved_el;
        throw;
    }
}

std::vector<std::string> check_fold_hygiene(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw PrerequisiteError("manifest.json not found in " + dir.string());
    }
    json manifest;
    {
        std::ifstream in(manifest_path);
        manifest = json::parse(in);
    }
    std::vector<std::string> violations;
    std::map<std::string, std::set<std::string>> trained_on;
    for (const auto& [name, entry] : manifest.at("checkpoints").items()) {
        if (entry.contains("trained_on")) {
            const auto ids = entry.at("trained_on").get<std::vector<std::string>>();
            trained_on[name] = {ids.begin(), ids.end()};
        }
    }
    // The reader training file must be the one the manifest vouches for.
    const auto& reader = manifest.at("checkpoints").at("reader");
    const std::string train_file = reader.at("training_examples");
    bool found = false;
    for (const auto& [stage, entry] : manifest.at("stages").items()) {
        if (entry.contains("outputs") && entry["outputs"].contains(train_file)) {
            found = true;
            if (entry["outputs"][train_file] != sha256_file(dir / train_file)) {
                violations.push_back(train_file + " does not match its manifest hash");
            }
        }
    }
    if (!found) {
        violations.push_back(train_file + " is not recorded in the manifest");
    }
    for (const auto& row : read_jsonl(dir / train_file)) {
        const std::string qid = row.at("qid");
        const std::string source = row.at("reasoner");
        if (source == "ir") {
            continue;
        }
        auto it = trained_on.find(source);
        if (it == trained_on.end()) {
            violations.push_back(qid + ": passages from unknown reasoner " + source);
        } else if (it->second.count(qid) != 0) {
            violations.push_back(qid + ": passages predicted by " + source + ", which trained on it");
        }
    }
    return violations;
}

}  // namespace mhqa
