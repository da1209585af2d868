#include "ffagent/env.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ffagent/checkpoint.hpp"
#include "ffagent/errors.hpp"

namespace ffagent {

namespace fs = std::filesystem;
using nn::Vec;

void VideoSpec::validate(bool require_segments) const {
    if (num_frames < 1) throw DataError("video " + id + ": no frames");
    if (frame_features.rows != num_frames)
        throw DataError("video " + id + ": feature rows " + std::to_string(frame_features.rows) +
                        " != num_frames " + std::to_string(num_frames));
    document.validate();
    if (require_segments && segments.empty())
        throw DataError("video " + id + ": ground-truth segments required");
    int prev_end = 0;
    for (const auto& [s, e] : segments) {
        if (s < 1 || e < s || static_cast<std::size_t>(e) > num_frames)
            throw DataError("video " + id + ": segment [" + std::to_string(s) + "," +
                            std::to_string(e) + "] out of range");
        if (s <= prev_end)
            throw DataError("video " + id + ": segments overlap or are unsorted");
        prev_end = e;
    }
}

Vec clip_at(const VideoSpec& video, std::size_t f, std::size_t window) {
    if (f < 1 || f > video.num_frames)
        throw DataError("clip_at: frame " + std::to_string(f) + " out of range [1, " +
                        std::to_string(video.num_frames) + "]");
    const std::size_t end = std::min(f + window - 1, video.num_frames);
    const std::size_t z = video.frame_features.cols;
    Vec out(z, 0.0);
    for (std::size_t i = f; i <= end; ++i) {
        const double* row = video.frame_features.row(i - 1);
        for (std::size_t j = 0; j < z; ++j) out[j] += row[j];
    }
    const double n = static_cast<double>(end - f + 1);
    for (auto& v : out) v /= n;
    return out;
}

double reward(double alignment_score, bool is_terminal, double s_hat_final, int s_star,
              double lambda, double sigma) {
    if (sigma <= 0.0) throw ConfigError("reward: sigma must be positive");
    if (lambda < 0.0) throw ConfigError("reward: lambda must be nonnegative");
    if (!is_terminal) return alignment_score;
    const double dev = (s_hat_final - static_cast<double>(s_star)) / sigma;
    const double g = std::max(std::exp(-0.5 * dev * dev), 1e-300);
    return lambda * g;
}

EpisodeTrace rollout(const VideoSpec& video, const Encoder& encoder, const Agent& agent,
                     const RolloutOptions& opts, std::mt19937_64* rng,
                     const std::vector<Vec>* cached_ps) {
    video.validate();
    if (opts.s_star < 1 || opts.s_star > agent.cfg.nu_max)
        throw ConfigError("rollout: target speed-up out of range");
    if (encoder.cfg.embed_dim != agent.cfg.d)
        throw ConfigError("rollout: encoder embedding dim " +
                          std::to_string(encoder.cfg.embed_dim) + " != agent d " +
                          std::to_string(agent.cfg.d));
    const double lambda = opts.lambda >= 0.0
                              ? opts.lambda
                              : static_cast<double>(video.num_frames) / opts.s_star;
    std::vector<Vec> local_ps;
    const std::vector<Vec>* ps = cached_ps;
    if (!ps) {
        local_ps = encoder.sentence_embeddings(video.document);
        ps = &local_ps;
    }

    EpisodeTrace trace;
    const std::size_t F = video.num_frames;
    std::size_t f = 1;
    Kinematics k{std::min(opts.s_star, agent.cfg.nu_max), 1};
    std::size_t t = 0;
    while (true) {
        ++t;
        const Vec phi = clip_at(video, f, opts.window);
        const Vec e_v = encoder.encode_clip(phi);
        const Vec e_d = encoder.encode_document_from_ps(*ps, phi);
        const double s_hat = static_cast<double>(f - 1) / static_cast<double>(t);
        const Vec e_p = nrpe(f, F, agent.cfg.q);
        const Vec e_s = skip_encoding(s_hat, opts.s_star, agent.cfg.nu_max);
        const Vec state = compose_state(e_d, e_v, e_p, e_s);
        const Vec dist = agent.policy_forward(state);
        const Action a = opts.teacher ? opts.teacher(alignment(e_d, e_v), s_hat, opts.s_star)
                                      : select_action(dist, opts.mode, rng);
        k = apply_action(k, a, agent.cfg.nu_max, agent.cfg.omega_max);

        trace.frames.push_back(f);
        trace.actions.push_back(a);
        trace.log_probs.push_back(std::log(dist[static_cast<std::size_t>(a)]));
        if (opts.keep_states) trace.states.push_back(state);

        if (f + static_cast<std::size_t>(k.nu) > F) {
            trace.s_hat_final = static_cast<double>(f - 1) / static_cast<double>(t);
            trace.rewards.push_back(
                reward(0.0, true, trace.s_hat_final, opts.s_star, lambda, opts.sigma));
            break;
        }
        trace.rewards.push_back(reward(alignment(e_d, e_v), false, 0.0, opts.s_star, lambda,
                                       opts.sigma));
        f += static_cast<std::size_t>(k.nu);
    }
    return trace;
}

nlohmann::json SynthVideoConfig::to_json() const {
    return {{"library", library.to_json()},
            {"n_videos", n_videos},
            {"frames_min", frames_min},
            {"frames_max", frames_max},
            {"segments_min", segments_min},
            {"segments_max", segments_max},
            {"segment_len_min", segment_len_min},
            {"segment_len_max", segment_len_max},
            {"sentences_per_segment", sentences_per_segment},
            {"distractor_region", distractor_region},
            {"noise", noise},
            {"seed", seed}};
}

SynthVideoConfig SynthVideoConfig::from_json(const nlohmann::json& j) {
    SynthVideoConfig c;
    if (j.contains("library")) c.library = LibraryConfig::from_json(j.at("library"));
    c.n_videos = j.value("n_videos", c.n_videos);
    c.frames_min = j.value("frames_min", c.frames_min);
    c.frames_max = j.value("frames_max", c.frames_max);
    c.segments_min = j.value("segments_min", c.segments_min);
    c.segments_max = j.value("segments_max", c.segments_max);
    c.segment_len_min = j.value("segment_len_min", c.segment_len_min);
    c.segment_len_max = j.value("segment_len_max", c.segment_len_max);
    c.sentences_per_segment = j.value("sentences_per_segment", c.sentences_per_segment);
    c.distractor_region = j.value("distractor_region", c.distractor_region);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::vector<VideoSpec> generate_videos(const SynthVideoConfig& cfg, const TopicLibrary& lib) {
    std::mt19937_64 rng(cfg.seed);
    std::vector<VideoSpec> videos;
    for (std::size_t vi = 0; vi < cfg.n_videos; ++vi) {
        std::uniform_int_distribution<std::size_t> fdist(cfg.frames_min, cfg.frames_max);
        const std::size_t F = fdist(rng);
        std::uniform_int_distribution<std::size_t> cdist(cfg.segments_min, cfg.segments_max);
        const std::size_t n_seg = cdist(rng);

        // place disjoint segments by rejection
        std::vector<std::pair<int, int>> segments;
        for (std::size_t s = 0; s < n_seg; ++s) {
            std::uniform_int_distribution<std::size_t> ldist(cfg.segment_len_min,
                                                             cfg.segment_len_max);
            const std::size_t len = ldist(rng);
            if (len >= F) throw DataError("synth: segment length exceeds video length");
            bool placed = false;
            for (int tries = 0; tries < 200 && !placed; ++tries) {
                std::uniform_int_distribution<std::size_t> sdist(1, F - len + 1);
                const int start = static_cast<int>(sdist(rng));
                const int end = start + static_cast<int>(len) - 1;
                bool clash = false;
                for (const auto& [a, b] : segments)
                    if (start <= b + 1 && end >= a - 1) clash = true;
                if (!clash) {
                    segments.emplace_back(start, end);
                    placed = true;
                }
            }
            if (!placed) throw DataError("synth: infeasible segment layout");
        }
        std::sort(segments.begin(), segments.end());

        // one distinct topic per segment
        std::vector<std::size_t> all_topics(lib.num_topics());
        for (std::size_t i = 0; i < all_topics.size(); ++i) all_topics[i] = i;
        std::shuffle(all_topics.begin(), all_topics.end(), rng);
        std::vector<std::size_t> seg_topics(all_topics.begin(),
                                            all_topics.begin() + static_cast<long>(segments.size()));
        std::vector<std::size_t> distractors(all_topics.begin() + static_cast<long>(segments.size()),
                                             all_topics.end());

        VideoSpec video;
        video.id = "video" + std::to_string(vi);
        video.num_frames = F;
        video.frame_features = nn::Matrix(F, lib.z());
        video.segments = segments;

        std::vector<std::string> lines;
        for (std::size_t s = 0; s < segments.size(); ++s)
            for (std::size_t i = 0; i < cfg.sentences_per_segment; ++i)
                lines.push_back(lib.sentence(seg_topics[s], cfg.library.sentence_len, rng));
        video.document = make_document(lines);

        std::uniform_int_distribution<std::size_t> ddist(0, distractors.size() - 1);
        std::size_t region_topic = distractors[ddist(rng)];
        for (std::size_t f = 1; f <= F; ++f) {
            std::size_t topic = region_topic;
            bool in_segment = false;
            for (std::size_t s = 0; s < segments.size(); ++s) {
                if (static_cast<int>(f) >= segments[s].first &&
                    static_cast<int>(f) <= segments[s].second) {
                    topic = seg_topics[s];
                    in_segment = true;
                    break;
                }
            }
            if (!in_segment && f % cfg.distractor_region == 0)
                region_topic = distractors[ddist(rng)];
            const Vec feats = lib.features(topic, cfg.noise, rng);
            std::copy(feats.begin(), feats.end(), video.frame_features.row(f - 1));
        }
        video.validate();
        videos.push_back(std::move(video));
    }
    return videos;
}

void save_dataset(const std::vector<VideoSpec>& videos, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "blobs");
    nlohmann::json manifest;
    manifest["videos"] = nlohmann::json::array();
    for (const auto& v : videos) {
        const std::string blob_rel = "blobs/" + v.id + ".bin";
        const std::string blob_abs = (fs::path(dir) / blob_rel).string();
        nn::write_f32_blob(blob_abs, v.frame_features.data.data(), v.frame_features.size());
        nlohmann::json sidecar = {{"rows", v.frame_features.rows},
                                  {"cols", v.frame_features.cols}};
        std::ofstream sc(blob_abs + ".json");
        sc << sidecar.dump() << "\n";

        std::vector<std::string> doc_lines;
        for (const auto& s : v.document.sentences) {
            std::string line;
            for (const auto& tok : s) {
                if (!line.empty()) line += ' ';
                line += tok;
            }
            doc_lines.push_back(line);
        }
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& [a, b] : v.segments) segs.push_back({a, b});
        manifest["videos"].push_back({{"id", v.id},
                                      {"num_frames", v.num_frames},
                                      {"features", blob_rel},
                                      {"document", doc_lines},
                                      {"segments", segs}});
    }
    std::ofstream out((fs::path(dir) / "manifest.json").string());
    if (!out) throw DataError("cannot write dataset manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

std::vector<VideoSpec> load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("missing dataset manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid dataset manifest " + manifest_path + ": " + e.what());
    }
    if (!manifest.contains("videos") || !manifest["videos"].is_array())
        throw DataError("dataset manifest missing 'videos' array: " + manifest_path);
    const auto base = fs::path(manifest_path).parent_path();
    std::vector<VideoSpec> videos;
    for (const auto& e : manifest["videos"]) {
        VideoSpec v;
        try {
            v.id = e.at("id").get<std::string>();
            v.num_frames = e.at("num_frames").get<std::size_t>();
            const std::string blob_rel = e.at("features").get<std::string>();
            const std::string blob_abs = (base / blob_rel).string();
            std::ifstream sc(blob_abs + ".json");
            if (!sc) throw DataError("missing feature sidecar: " + blob_abs + ".json");
            nlohmann::json sidecar;
            sc >> sidecar;
            const std::size_t rows = sidecar.at("rows").get<std::size_t>();
            const std::size_t cols = sidecar.at("cols").get<std::size_t>();
            v.frame_features = nn::Matrix(rows, cols);
            v.frame_features.data = nn::read_f32_blob(blob_abs, rows * cols);
            v.document = make_document(e.at("document").get<std::vector<std::string>>());
            if (e.contains("segments"))
                for (const auto& seg : e.at("segments"))
                    v.segments.emplace_back(seg.at(0).get<int>(), seg.at(1).get<int>());
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("dataset manifest schema violation: " + std::string(ex.what()));
        }
        v.validate();
        videos.push_back(std::move(v));
    }
    return videos;
}

}  // namespace ffagent
