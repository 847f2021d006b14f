#pragma once

#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhqa/bridge.hpp"
#include "mhqa/config.hpp"
#include "mhqa/corpus.hpp"
#include "mhqa/eval.hpp"
#include "mhqa/reader.hpp"
#include "mhqa/retrieval.hpp"
#include "mhqa/vocab.hpp"

namespace mhqa {

/// Exit status for an exception escaping a stage: 1 validation, 2 missing
/// prerequisite, 3 anything else.
int exit_code_for(const std::exception& e);

/// Start passages of one question: retriever output plus linked extras.
struct StartPassages {
    std::vector<std::string> retrieved;  // passage ids, rank order
    std::vector<std::string> linked;     // passage ids appended by entity linking
};

struct Prediction {
    std::string qid;
    std::string answer;
    std::vector<std::string> passages;  // titles fed to the reader
    std::vector<std::string> ranked;    // answer-passage ranking, when one exists
    bool fallback = false;
};

/// Stage-wise driver. Every stage reads its prerequisites from the output
/// directory, writes its artifacts there and records them in manifest.json.
class Pipeline {
  public:
    explicit Pipeline(PipelineConfig config);

    static const std::vector<std::string>& stage_names();

    const PipelineConfig& config() const { return config_; }
    const std::filesystem::path& output_dir() const { return out_; }

    void run_stage(const std::string& stage);
    void run_all();

    void ingest();
    void build_index();
    void derive_labels();
    void train_bridge();
    void cross_predict();
    void train_reader();
    void predict();
    MetricReport evaluate();

    /// predict + evaluate under `mode`, leaving the configured mode intact.
    MetricReport run_ablation(const std::string& mode);

    // Access for tests and tools.
    const Corpus& corpus();
    const std::vector<QARecord>& train_questions();
    const std::vector<QARecord>& dev_questions();
    const Vocabulary& vocab();
    const InvertedIndex& index();
    std::vector<const Passage*> start_passages(const QARecord& q, bool with_linking);
    StartPassages retrieve(const QARecord& q);
    BridgeConfig bridge_config(BridgeVariant variant) const;
    ReaderConfig reader_config(double aux_weight) const;

  private:
    std::filesystem::path path(const std::string& name) const { return out_ / name; }
    void require(const std::string& file, const std::string& hint) const;
    const std::map<std::string, StartPassages>& retrieval_cache();
    LabelSet load_labels(const std::string& split) const;
    const WordVectors* word_vectors();

    struct TrainedReasoner {
        std::string checkpoint_sha256;
        std::vector<std::string> trained_on;
        nlohmann::json info;
    };
    TrainedReasoner train_reasoner(const std::string& name, BridgeVariant variant,
                                   const std::vector<std::string>& qids);
    std::vector<std::string> rank_for(const BridgeReasoner& reasoner, nc::ParamStore& store, const QARecord& q,
                                      bool with_linking, nlohmann::json* candidate_dump);

    void record_stage(const std::string& key, const std::vector<std::string>& outputs,
                      const nlohmann::json& info = nlohmann::json::object());
    nlohmann::json load_manifest() const;
    void save_manifest(const nlohmann::json& manifest) const;

    PipelineConfig config_;
    std::filesystem::path out_;
    std::optional<Corpus> corpus_;
    std::optional<std::vector<QARecord>> train_;
    std::optional<std::vector<QARecord>> dev_;
    std::optional<Vocabulary> vocab_;
    std::optional<InvertedIndex> index_;
    std::optional<std::map<std::string, StartPassages>> retrieval_;
    std::optional<WordVectors> vectors_;
    bool vectors_loaded_ = false;
    std::unique_ptr<ExactTitleLinker> linker_;
};

/// Reads a run directory and lists every reader-training example whose
/// passages came from a reasoner that was trained on that example. Empty
/// means the folds were kept apart.
std::vector<std::string> check_fold_hygiene(const std::filesystem::path& output_dir);

std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace mhqa
