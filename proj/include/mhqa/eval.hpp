#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhqa/corpus.hpp"

namespace mhqa {

/// Lowercase, drop punctuation, drop the whole words "a", "an", "the", and
/// collapse whitespace.
std::string normalize_answer(std::string_view text);

/// Whitespace tokens of the normalized answer.
std::vector<std::string> answer_tokens(std::string_view text);

struct EmF1 {
    double em = 0.0;
    double f1 = 0.0;
};

/// Exact match and multiset token-overlap F1 after normalization.
EmF1 em_f1(std::string_view prediction, std::string_view gold);

/// 1 when `gold_title` is among the first k titles. k must be at least 1.
int hits_at_k(const std::vector<std::string>& ranked_titles, std::string_view gold_title, std::size_t k);

/// True when the normalized answer occurs as a contiguous token run in the
/// normalized text.
bool contains_answer(std::string_view text, std::string_view answer);

struct QuestionMetrics {
    std::string qid;
    QuestionType qtype = QuestionType::bridge;
    std::string prediction;
    std::string gold;
    double em = 0.0;
    double f1 = 0.0;
    std::optional<int> hits1;
    std::optional<int> hits10;
};

struct Aggregate {
    std::size_t count = 0;
    bool defined = false;  // false when there is nothing to average
    double em = 0.0;
    double f1 = 0.0;
    std::size_t ranked = 0;  // questions carrying hits flags
    double hits1 = 0.0;
    double hits10 = 0.0;
};

struct MetricReport {
    std::string mode;
    std::vector<QuestionMetrics> questions;
    Aggregate full;
    Aggregate bridge_only;
};

Aggregate aggregate(const std::vector<QuestionMetrics>& rows);
MetricReport make_report(std::string mode, std::vector<QuestionMetrics> rows);

nlohmann::json to_json(const Aggregate& agg);
nlohmann::json to_json(const QuestionMetrics& row);
/// Aggregates only; per-question rows go to the detail file.
nlohmann::json report_summary_json(const MetricReport& report);

/// Writes `<stem>.json` (aggregates) and `<stem>_detail.jsonl`.
void write_report(const MetricReport& report, const std::filesystem::path& dir, const std::string& stem);

}  // namespace mhqa
