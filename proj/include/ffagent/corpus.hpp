#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffagent/matrix.hpp"
#include "ffagent/text.hpp"

namespace ffagent {

// One clip: a z-dimensional feature vector plus the sentences describing it.
struct Clip {
    std::string id;
    nn::Vec features;
    std::vector<std::string> captions;
};

struct Corpus {
    std::vector<Clip> clips;
};

// <document, clip, label> pair for encoder training. Positive documents hold
// the clip's own captions plus distractors; negatives hold only distractors.
struct TrainingPair {
    Document document;
    std::size_t clip_index = 0;
    int label = 1;  // +1 or -1
};

TrainingPair build_pair(const Corpus& corpus, std::size_t clip_index, int label,
                        std::mt19937_64& rng);

// Shared generative family for corpus clips and synthetic videos: each topic
// is a latent unit vector in feature space with its own token pool.
struct TopicLibrary {
    nn::Matrix topic_vecs;  // K x z, unit rows
    std::vector<std::vector<std::string>> topic_tokens;
    std::vector<std::string> filler_tokens;

    std::size_t num_topics() const { return topic_vecs.rows; }
    std::size_t z() const { return topic_vecs.cols; }

    nn::Vec features(std::size_t topic, double noise, std::mt19937_64& rng) const;
    std::string sentence(std::size_t topic, std::size_t length, std::mt19937_64& rng) const;
};

struct LibraryConfig {
    std::size_t n_topics = 64;
    std::size_t tokens_per_topic = 12;
    std::size_t z = 64;
    std::size_t sentence_len = 6;
    std::uint64_t seed = 11;

    nlohmann::json to_json() const;
    static LibraryConfig from_json(const nlohmann::json& j);
};

TopicLibrary make_topic_library(const LibraryConfig& cfg);

struct SynthCorpusConfig {
    LibraryConfig library;
    std::size_t n_clips = 240;
    std::size_t captions_per_clip = 3;
    double noise = 0.1;
    std::uint64_t seed = 21;

    nlohmann::json to_json() const;
    static SynthCorpusConfig from_json(const nlohmann::json& j);
};

Corpus generate_corpus(const SynthCorpusConfig& cfg, const TopicLibrary& lib);

// Corpus file: JSON list of {clip_id, features (inline array or blob path),
// captions}. Blob features use a JSON sidecar {rows, cols} next to the blob.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Vocabulary over every token appearing in the corpus.
Vocabulary build_vocabulary(const Corpus& corpus, std::size_t word_dim, std::uint64_t seed);

}  // namespace ffagent
