#include "ffagent/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ffagent/errors.hpp"

namespace ffagent {

void Document::validate() const {
    if (sentences.empty()) throw DataError("document has no sentences");
    for (const auto& s : sentences) {
        if (s.empty()) throw DataError("document contains an empty sentence");
        if (s.size() > kMaxSentenceTokens)
            throw DataError("sentence exceeds " + std::to_string(kMaxSentenceTokens) + " tokens");
    }
}

Sentence tokenize(const std::string& text) {
    Sentence out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Sentence chop(Sentence s, std::size_t max_tokens) {
    if (s.size() > max_tokens) s.resize(max_tokens);
    return s;
}

Document make_document(const std::vector<std::string>& lines) {
    Document doc;
    for (const auto& line : lines) {
        Sentence s = chop(tokenize(line));
        if (!s.empty()) doc.sentences.push_back(std::move(s));
    }
    doc.validate();
    return doc;
}

Vocabulary::Vocabulary(std::size_t word_dim, std::mt19937_64& rng)
    : table(0, word_dim), gtable(0, word_dim) {
    table.cols = word_dim;
    gtable.cols = word_dim;
    add(kOovToken, rng);
}

std::size_t Vocabulary::add(const std::string& token, std::mt19937_64& rng) {
    auto it = index.find(token);
    if (it != index.end()) return it->second;
    const std::size_t row = table.rows;
    const double bound = std::sqrt(1.0 / static_cast<double>(table.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t j = 0; j < table.cols; ++j) table.data.push_back(dist(rng));
    gtable.data.resize(table.data.size(), 0.0);
    ++table.rows;
    ++gtable.rows;
    index[token] = row;
    tokens.push_back(token);
    return row;
}

std::size_t Vocabulary::lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? index.at(kOovToken) : it->second;
}

nn::Vec Vocabulary::embed(const std::string& token) const {
    const std::size_t row = lookup(token);
    return nn::Vec(table.row(row), table.row(row) + table.cols);
}

Vocabulary Vocabulary::load_pretrained(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word vectors: " + path);
    Vocabulary vocab;
    std::string line;
    std::size_t dim = 0;
    std::vector<double> flat;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (dim == 0) dim = vals.size();
        if (vals.empty() || vals.size() != dim)
            throw DataError("malformed word vector line for token '" + token + "' in " + path);
        vocab.index[token] = vocab.tokens.size();
        vocab.tokens.push_back(token);
        flat.insert(flat.end(), vals.begin(), vals.end());
    }
    if (dim == 0) throw DataError("no word vectors found in " + path);
    if (!vocab.index.count(kOovToken)) {
        vocab.index[kOovToken] = vocab.tokens.size();
        vocab.tokens.push_back(kOovToken);
        flat.insert(flat.end(), dim, 0.0);
    }
    vocab.table.rows = vocab.tokens.size();
    vocab.table.cols = dim;
    vocab.table.data = std::move(flat);
    vocab.gtable = nn::Matrix(vocab.table.rows, dim);
    vocab.frozen = true;
    return vocab;
}

}  // namespace ffagent
