#include "mhqa/vocab.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mhqa/errors.hpp"
#include "mhqa/rng.hpp"

namespace mhqa {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    tokens_.push_back(kUnkToken);
    index_.emplace(kUnkToken, kUnk);
    for (const auto& t : tokens) {
        if (index_.emplace(t, tokens_.size()).second) {
            tokens_.push_back(t);
        }
    }
}

std::size_t Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::ids(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        out.push_back(id(t));
    }
    return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write vocabulary '" + path.string() + "'");
    }
    for (std::size_t i = 1; i < tokens_.size(); ++i) {
        out << tokens_[i] << '\n';
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw PrerequisiteError("vocabulary '" + path.string() + "' not found; run ingest");
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            tokens.push_back(line);
        }
    }
    return Vocabulary(tokens);
}

Vocabulary build_vocabulary(const Corpus& corpus, const std::vector<std::vector<QARecord>>& question_sets) {
    std::set<std::string> all;
    for (const auto& p : corpus.passages()) {
        all.insert(p.title_tokens.tokens.begin(), p.title_tokens.tokens.end());
        all.insert(p.text_tokens.tokens.begin(), p.text_tokens.tokens.end());
    }
    for (const auto& set : question_sets) {
        for (const auto& q : set) {
            auto t = tokenize(q.question);
            all.insert(t.tokens.begin(), t.tokens.end());
        }
    }
    all.insert("yes");
    all.insert("no");
    return Vocabulary(std::vector<std::string>(all.begin(), all.end()));
}

WordVectors load_word_vectors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open embedding file '" + path.string() + "'");
    }
    WordVectors wv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> v;
        std::string field;
        while (ls >> field) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(field, &used));
                if (used != field.size()) {
                    throw std::invalid_argument(field);
                }
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
            }
        }
        if (wv.dim == 0) {
            if (v.empty()) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": no vector components");
            }
            wv.dim = v.size();
        } else if (v.size() != wv.dim) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(wv.dim) + " components, got " + std::to_string(v.size()));
        }
        wv.vectors.emplace(token, std::move(v));
    }
    return wv;
}

nc::Tensor init_embedding_matrix(const Vocabulary& vocab, std::size_t dim, const WordVectors* pretrained,
                                 Rng& rng) {
    if (pretrained != nullptr && pretrained->dim != dim) {
        throw ValidationError("embedding file has dimension " + std::to_string(pretrained->dim) +
                              " but the model expects " + std::to_string(dim));
    }
    nc::Tensor m(vocab.size(), dim);
    for (std::size_t r = 0; r < vocab.size(); ++r) {
        const std::vector<double>* found = nullptr;
        if (pretrained != nullptr) {
            auto it = pretrained->vectors.find(vocab.tokens()[r]);
            if (it != pretrained->vectors.end()) {
                found = &it->second;
            }
        }
        for (std::size_t c = 0; c < dim; ++c) {
            // Always draw so the stream does not depend on which rows were found.
            const double drawn = rng.uniform(-0.1, 0.1);
            m(r, c) = found != nullptr ? (*found)[c] : drawn;
        }
    }
    return m;
}

}  // namespace mhqa
