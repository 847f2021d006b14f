#include "mhqa/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mhqa/errors.hpp"
#include "mhqa/utf8.hpp"

namespace mhqa {

namespace {

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v' ||
           cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x3000;
}

bool is_article(const std::string& w) { return w == "a" || w == "an" || w == "the"; }

}  // namespace

std::vector<std::string> answer_tokens(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !is_article(current)) {
            words.push_back(current);
        }
        current.clear();
    };
    for (const auto& cp : utf8::decode(text)) {
        if (is_space(cp.value)) {
            flush();
        } else if (utf8::is_alnum(cp.value)) {
            utf8::append(current, utf8::to_lower(cp.value));
        }
        // Anything else is punctuation and vanishes without splitting words.
    }
    flush();
    return words;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    for (const auto& w : answer_tokens(text)) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

EmF1 em_f1(std::string_view prediction, std::string_view gold) {
    const auto p = answer_tokens(prediction);
    const auto g = answer_tokens(gold);
    EmF1 r;
    r.em = p == g ? 1.0 : 0.0;
    if (p.empty() || g.empty()) {
        r.f1 = r.em;
        return r;
    }
    std::map<std::string, int> counts;
    for (const auto& w : g) {
        ++counts[w];
    }
    int common = 0;
    for (const auto& w : p) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) {
        return r;
    }
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    r.f1 = 2.0 * precision * recall / (precision + recall);
    return r;
}

int hits_at_k(const std::vector<std::string>& ranked_titles, std::string_view gold_title, std::size_t k) {
    if (k < 1) {
        throw ValidationError("hits_at_k: k must be at least 1");
    }
    const std::size_t n = std::min(k, ranked_titles.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (ranked_titles[i] == gold_title) {
            return 1;
        }
    }
    return 0;
}

bool contains_answer(std::string_view text, std::string_view answer) {
    const auto needle = answer_tokens(answer);
    if (needle.empty()) {
        return false;
    }
    const auto hay = answer_tokens(text);
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

Aggregate aggregate(const std::vector<QuestionMetrics>& rows) {
    Aggregate a;
    a.count = rows.size();
    a.defined = !rows.empty();
    for (const auto& r : rows) {
        a.em += r.em;
        a.f1 += r.f1;
        if (r.hits1 && r.hits10) {
            ++a.ranked;
            a.hits1 += *r.hits1;
            a.hits10 += *r.hits10;
        }
    }
    if (a.count > 0) {
        a.em /= static_cast<double>(a.count);
        a.f1 /= static_cast<double>(a.count);
    }
    if (a.ranked > 0) {
        a.hits1 /= static_cast<double>(a.ranked);
        a.hits10 /= static_cast<double>(a.ranked);
    }
    return a;
}

MetricReport make_report(std::string mode, std::vector<QuestionMetrics> rows) {
    MetricReport report;
    report.mode = std::move(mode);
    report.questions = std::move(rows);
    report.full = aggregate(report.questions);
    std::vector<QuestionMetrics> bridge;
    std::copy_if(report.questions.begin(), report.questions.end(), std::back_inserter(bridge),
                 [](const QuestionMetrics& r) { return r.qtype == QuestionType::bridge; });
    report.bridge_only = aggregate(bridge);
    return report;
}

nlohmann::json to_json(const Aggregate& agg) {
    nlohmann::json j = {{"count", agg.count}, {"defined", agg.defined}};
    if (agg.defined) {
        j["em"] = agg.em;
        j["f1"] = agg.f1;
    } else {
        j["em"] = nullptr;
        j["f1"] = nullptr;
    }
    j["ranked"] = agg.ranked;
    if (agg.ranked > 0) {
        j["hits@1"] = agg.hits1;
        j["hits@10"] = agg.hits10;
    }
    return j;
}

nlohmann::json to_json(const QuestionMetrics& row) {
    nlohmann::json j = {{"qid", row.qid},         {"qtype", std::string(to_string(row.qtype))},
                        {"prediction", row.prediction}, {"gold", row.gold},
                        {"em", row.em},           {"f1", row.f1}};
    if (row.hits1) {
        j["hits@1"] = *row.hits1;
    }
    if (row.hits10) {
        j["hits@10"] = *row.hits10;
    }
    return j;
}

nlohmann::json report_summary_json(const MetricReport& report) {
    return {{"mode", report.mode}, {"full", to_json(report.full)}, {"bridge_only", to_json(report.bridge_only)}};
}

void write_report(const MetricReport& report, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / (stem + ".json"));
        out << report_summary_json(report).dump(2) << '\n';
    }
    std::ofstream detail(dir / (stem + "_detail.jsonl"));
    for (const auto& row : report.questions) {
        detail << to_json(row).dump() << '\n';
    }
    if (!detail) {
        throw Error("failed to write report under " + dir.string());
    }
}

}  // namespace mhqa
