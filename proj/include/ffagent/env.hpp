#pragma once

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ffagent/corpus.hpp"
#include "ffagent/encoder.hpp"
#include "ffagent/saffa.hpp"

namespace ffagent {

// A video the agent navigates: per-frame clip features, the instruction
// document, and (optionally) ground-truth relevant segments.
struct VideoSpec {
    std::string id;
    std::size_t num_frames = 0;
    nn::Matrix frame_features;  // num_frames x z
    Document document;
    std::vector<std::pair<int, int>> segments;  // 1-based inclusive, sorted, disjoint

    void validate(bool require_segments = false) const;
};

constexpr std::size_t kClipWindow = 32;  // M

// Mean of the per-frame features over [f, min(f+M-1, F)].
nn::Vec clip_at(const VideoSpec& video, std::size_t f, std::size_t window = kClipWindow);

// Step reward: alignment while navigating, Gaussian speed-up term at the
// terminal step. Terminal value is clamped away from exact zero so it stays
// in (0, lambda] even for extreme deviations.
double reward(double alignment_score, bool is_terminal, double s_hat_final, int s_star,
              double lambda, double sigma);

struct EpisodeTrace {
    std::vector<std::size_t> frames;  // strictly increasing, starts at 1
    std::vector<Action> actions;
    std::vector<double> log_probs;
    std::vector<nn::Vec> states;
    std::vector<double> rewards;  // last entry is the terminal reward
    double s_hat_final = 0.0;

    std::size_t length() const { return frames.size(); }
};

struct RolloutOptions {
    int s_star = 12;
    SelectMode mode = SelectMode::Greedy;
    double sigma = 0.5;
    double lambda = -1.0;  // <0: use F / S*  (desired frame count)
    std::size_t window = kClipWindow;
    bool keep_states = true;
    // When set, overrides the policy's action choice; arguments are the
    // current alignment score, the achieved speed-up so far, and S*.
    std::function<Action(double, double, int)> teacher;
};

EpisodeTrace rollout(const VideoSpec& video, const Encoder& encoder, const Agent& agent,
                     const RolloutOptions& opts, std::mt19937_64* rng,
                     const std::vector<nn::Vec>* cached_ps = nullptr);

struct SynthVideoConfig {
    LibraryConfig library;
    std::size_t n_videos = 30;
    std::size_t frames_min = 400;
    std::size_t frames_max = 900;
    std::size_t segments_min = 2;
    std::size_t segments_max = 4;
    std::size_t segment_len_min = 40;
    std::size_t segment_len_max = 90;
    std::size_t sentences_per_segment = 2;
    std::size_t distractor_region = 48;  // frames per out-of-segment topic region
    double noise = 0.08;
    std::uint64_t seed = 33;

    nlohmann::json to_json() const;
    static SynthVideoConfig from_json(const nlohmann::json& j);
};

std::vector<VideoSpec> generate_videos(const SynthVideoConfig& cfg, const TopicLibrary& lib);

// Dataset manifest: JSON {videos: [{id, num_frames, features, document, segments}]},
// feature blobs little-endian float32 with JSON sidecars {rows, cols}.
void save_dataset(const std::vector<VideoSpec>& videos, const std::string& dir);
std::vector<VideoSpec> load_dataset(const std::string& manifest_path);

}  // namespace ffagent
