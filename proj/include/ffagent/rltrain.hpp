#pragma once

#include <iosfwd>
#include <random>
#include <vector>

#include "ffagent/adam.hpp"
#include "ffagent/env.hpp"
#include "ffagent/saffa.hpp"

namespace ffagent {

// Backward recursion R_t = r_t + gamma * R_{t+1}.
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

// Natural-log entropy of a probability vector.
double entropy(const nn::Vec& dist);

// REINFORCE-with-baseline loss: -sum_t log pi(a_t) (R_t - v_t) - beta sum_t H.
double policy_loss_value(const std::vector<nn::Vec>& dists, const std::vector<int>& actions,
                         const std::vector<double>& returns, const std::vector<double>& values,
                         double beta);

// Sum of squared errors of the value predictions against the returns.
double value_loss_value(const std::vector<double>& values, const std::vector<double>& returns);

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double mean_entropy = 0.0;
    double episode_return = 0.0;  // R_1
};

// One synchronous gradient update from a single episode. Advantages use the
// value predictions detached from the policy gradient; the value net trains
// against the same returns with its own optimizer. With
// normalize_advantages the advantages are standardized per episode, which
// keeps the gradient scale independent of the return magnitude.
UpdateStats policy_value_update(Agent& agent, nn::Adam& policy_opt, nn::Adam& value_opt,
                                const std::vector<nn::Vec>& states,
                                const std::vector<int>& actions,
                                const std::vector<double>& returns, double beta,
                                double clip_norm, bool normalize_advantages = false);

struct AgentTrainConfig {
    double gamma = 0.99;
    double sigma = 0.5;
    double lambda_scale = 1.0;  // terminal reward weight: lambda = scale * F / S*
    bool adv_norm = false;      // standardize advantages per episode
    double sigma_rel = 0.0;     // > 0: per-episode sigma = sigma_rel * S*
    bool center_alignment = false;  // subtract each video's mean alignment from step rewards
    double align_gain = 1.0;        // gain on the (centered) step rewards
    std::size_t warmup_epochs = 0;  // behavior-cloning epochs before REINFORCE
    double warmup_lr = 1e-3;
    double warmup_content_w = 2.0;  // teacher weight on centered alignment
    double beta = 0.01;
    double policy_lr = 5e-5;
    double value_lr = 1e-3;
    std::size_t epochs = 100;
    int s_star_min = 2;
    int s_star_max = 20;
    double clip_norm = 5.0;
    std::uint64_t seed = 7;

    nlohmann::json to_json() const;
    static AgentTrainConfig from_json(const nlohmann::json& j);
};

struct AgentEpochStats {
    std::size_t epoch = 0;
    double mean_return = 0.0;
    double mean_abs_speed_error = 0.0;
    double mean_entropy = 0.0;
    double wall_time_ms = 0.0;
};

struct AgentTrainResult {
    std::vector<AgentEpochStats> log;
};

// Encoder stays frozen; one update per episode; S* drawn per episode so a
// single agent serves every target rate.
AgentTrainResult train_agent(const std::vector<VideoSpec>& videos, const Encoder& encoder,
                             Agent& agent, const AgentTrainConfig& cfg,
                             std::ostream* ndjson_log = nullptr);

}  // namespace ffagent
