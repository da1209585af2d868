#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ffagent/matrix.hpp"

namespace ffagent {

using Sentence = std::vector<std::string>;

// Ordered instruction sentences. Sentences longer than max_sentence_tokens
// are chopped (first tokens kept).
struct Document {
    std::vector<Sentence> sentences;

    static constexpr std::size_t kMaxSentenceTokens = 20;

    void validate() const;
};

Sentence tokenize(const std::string& text);
Sentence chop(Sentence s, std::size_t max_tokens = Document::kMaxSentenceTokens);
Document make_document(const std::vector<std::string>& lines);

// Token lookup plus the (trainable) word embedding table. Unknown tokens
// resolve to the OOV row.
struct Vocabulary {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::string> tokens;  // row order
    nn::Matrix table;                 // |V| x word_dim
    nn::Matrix gtable;
    bool frozen = false;

    static constexpr const char* kOovToken = "<oov>";

    Vocabulary() = default;
    Vocabulary(std::size_t word_dim, std::mt19937_64& rng);

    std::size_t word_dim() const { return table.cols; }
    std::size_t add(const std::string& token, std::mt19937_64& rng);
    std::size_t lookup(const std::string& token) const;

    nn::Vec embed(const std::string& token) const;
    void zero_grad() { gtable.fill(0.0); }

    // Standard text format: token followed by whitespace-separated floats.
    // Loaded vectors are frozen.
    static Vocabulary load_pretrained(const std::string& path);
};

}  // namespace ffagent
