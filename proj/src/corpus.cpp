#include "ffagent/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ffagent/checkpoint.hpp"
#include "ffagent/errors.hpp"
#include "ffagent/layers.hpp"

namespace ffagent {

using nn::Vec;

TrainingPair build_pair(const Corpus& corpus, std::size_t clip_index, int label,
                        std::mt19937_64& rng) {
    const std::size_t n = corpus.clips.size();
    if (n < 3) throw DataError("build_pair: corpus needs at least 3 clips");
    if (clip_index >= n) throw DataError("build_pair: clip index out of range");
    if (label != 1 && label != -1) throw ConfigError("build_pair: label must be +1 or -1");

    auto pick_other = [&](std::size_t avoid_a, std::size_t avoid_b) {
        std::uniform_int_distribution<std::size_t> d(0, n - 1);
        std::size_t k;
        do {
            k = d(rng);
        } while (k == avoid_a || k == avoid_b);
        return k;
    };

    std::vector<std::string> lines;
    if (label == 1) {
        const std::size_t other = pick_other(clip_index, clip_index);
        lines = corpus.clips[clip_index].captions;
        const auto& extra = corpus.clips[other].captions;
        lines.insert(lines.end(), extra.begin(), extra.end());
    } else {
        const std::size_t a = pick_other(clip_index, clip_index);
        const std::size_t b = pick_other(clip_index, a);
        lines = corpus.clips[a].captions;
        const auto& extra = corpus.clips[b].captions;
        lines.insert(lines.end(), extra.begin(), extra.end());
    }
    std::shuffle(lines.begin(), lines.end(), rng);

    TrainingPair pair;
    pair.document = make_document(lines);
    pair.clip_index = clip_index;
    pair.label = label;
    return pair;
}

nlohmann::json LibraryConfig::to_json() const {
    return {{"n_topics", n_topics},
            {"tokens_per_topic", tokens_per_topic},
            {"z", z},
            {"sentence_len", sentence_len},
            {"seed", seed}};
}

LibraryConfig LibraryConfig::from_json(const nlohmann::json& j) {
    LibraryConfig c;
    c.n_topics = j.value("n_topics", c.n_topics);
    c.tokens_per_topic = j.value("tokens_per_topic", c.tokens_per_topic);
    c.z = j.value("z", c.z);
    c.sentence_len = j.value("sentence_len", c.sentence_len);
    c.seed = j.value("seed", c.seed);
    return c;
}

TopicLibrary make_topic_library(const LibraryConfig& cfg) {
    TopicLibrary lib;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    lib.topic_vecs = nn::Matrix(cfg.n_topics, cfg.z);
    for (std::size_t k = 0; k < cfg.n_topics; ++k) {
        Vec v(cfg.z);
        for (auto& x : v) x = nd(rng);
        v = nn::l2_normalize(v);
        std::copy(v.begin(), v.end(), lib.topic_vecs.row(k));
    }
    lib.topic_tokens.resize(cfg.n_topics);
    for (std::size_t k = 0; k < cfg.n_topics; ++k)
        for (std::size_t i = 0; i < cfg.tokens_per_topic; ++i)
            lib.topic_tokens[k].push_back("t" + std::to_string(k) + "w" + std::to_string(i));
    lib.filler_tokens = {"the", "a", "then", "and", "with", "into", "over", "next"};
    return lib;
}

Vec TopicLibrary::features(std::size_t topic, double noise, std::mt19937_64& rng) const {
    if (topic >= num_topics()) throw DataError("topic out of range");
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec v(topic_vecs.row(topic), topic_vecs.row(topic) + z());
    for (auto& x : v) x += noise * nd(rng);
    return v;
}

std::string TopicLibrary::sentence(std::size_t topic, std::size_t length,
                                   std::mt19937_64& rng) const {
    if (topic >= num_topics()) throw DataError("topic out of range");
    std::uniform_int_distribution<std::size_t> pick_topic_tok(0, topic_tokens[topic].size() - 1);
    std::uniform_int_distribution<std::size_t> pick_filler(0, filler_tokens.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string out;
    for (std::size_t i = 0; i < length; ++i) {
        const std::string& tok = u(rng) < 0.25 ? filler_tokens[pick_filler(rng)]
                                               : topic_tokens[topic][pick_topic_tok(rng)];
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

nlohmann::json SynthCorpusConfig::to_json() const {
    return {{"library", library.to_json()},
            {"n_clips", n_clips},
            {"captions_per_clip", captions_per_clip},
            {"noise", noise},
            {"seed", seed}};
}

SynthCorpusConfig SynthCorpusConfig::from_json(const nlohmann::json& j) {
    SynthCorpusConfig c;
    if (j.contains("library")) c.library = LibraryConfig::from_json(j.at("library"));
    c.n_clips = j.value("n_clips", c.n_clips);
    c.captions_per_clip = j.value("captions_per_clip", c.captions_per_clip);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
    return c;
}

Corpus generate_corpus(const SynthCorpusConfig& cfg, const TopicLibrary& lib) {
    std::mt19937_64 rng(cfg.seed);
    Corpus corpus;
    for (std::size_t i = 0; i < cfg.n_clips; ++i) {
        Clip clip;
        clip.id = "clip" + std::to_string(i);
        const std::size_t topic = i % lib.num_topics();
        clip.features = lib.features(topic, cfg.noise, rng);
        for (std::size_t s = 0; s < cfg.captions_per_clip; ++s)
            clip.captions.push_back(lib.sentence(topic, cfg.library.sentence_len, rng));
        corpus.clips.push_back(std::move(clip));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& clip : corpus.clips) {
        j.push_back({{"clip_id", clip.id},
                     {"features", clip.features},
                     {"captions", clip.captions}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus: " + path);
    out << j.dump(2) << "\n";
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing corpus file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid corpus JSON " + path + ": " + e.what());
    }
    if (!j.is_array()) throw DataError("corpus must be a JSON array: " + path);
    Corpus corpus;
    const auto base = std::filesystem::path(path).parent_path();
    for (const auto& e : j) {
        Clip clip;
        clip.id = e.at("clip_id").get<std::string>();
        const auto& feats = e.at("features");
        if (feats.is_array()) {
            clip.features = feats.get<Vec>();
        } else {
            const std::string blob = (base / feats.get<std::string>()).string();
            std::ifstream sc(blob + ".json");
            if (!sc) throw DataError("missing feature sidecar: " + blob + ".json");
            nlohmann::json sidecar;
            sc >> sidecar;
            const std::size_t rows = sidecar.at("rows").get<std::size_t>();
            const std::size_t cols = sidecar.at("cols").get<std::size_t>();
            if (rows != 1) throw DataError("clip feature blob must have one row: " + blob);
            clip.features = nn::read_f32_blob(blob, cols);
        }
        clip.captions = e.at("captions").get<std::vector<std::string>>();
        if (clip.captions.empty()) throw DataError("clip has no captions: " + clip.id);
        corpus.clips.push_back(std::move(clip));
    }
    return corpus;
}

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t word_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vocabulary vocab(word_dim, rng);
    for (const auto& clip : corpus.clips)
        for (const auto& cap : clip.captions)
            for (const auto& tok : tokenize(cap)) vocab.add(tok, rng);
    return vocab;
}

}  // namespace ffagent
