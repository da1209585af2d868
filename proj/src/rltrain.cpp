#include "ffagent/rltrain.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "ffagent/errors.hpp"

namespace ffagent {

using nn::Vec;

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
    if (rewards.empty()) throw DataError("discounted_returns: empty reward sequence");
    if (gamma <= 0.0 || gamma > 1.0)
        throw ConfigError("discounted_returns: gamma must be in (0, 1]");
    std::vector<double> returns(rewards.size());
    double acc = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    return returns;
}

double entropy(const Vec& dist) {
    double h = 0.0;
    for (double p : dist)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double policy_loss_value(const std::vector<Vec>& dists, const std::vector<int>& actions,
                         const std::vector<double>& returns, const std::vector<double>& values,
                         double beta) {
    if (dists.size() != actions.size() || dists.size() != returns.size() ||
        dists.size() != values.size())
        throw DataError("policy_loss: trace/value length mismatch");
    double loss = 0.0;
    for (std::size_t t = 0; t < dists.size(); ++t) {
        const double adv = returns[t] - values[t];
        loss -= std::log(dists[t][static_cast<std::size_t>(actions[t])]) * adv;
        loss -= beta * entropy(dists[t]);
    }
    return loss;
}

double value_loss_value(const std::vector<double>& values, const std::vector<double>& returns) {
    if (values.size() != returns.size()) throw DataError("value_loss: length mismatch");
    double loss = 0.0;
    for (std::size_t t = 0; t < values.size(); ++t) {
        const double d = values[t] - returns[t];
        loss += d * d;
    }
    return loss;
}

UpdateStats policy_value_update(Agent& agent, nn::Adam& policy_opt, nn::Adam& value_opt,
                                const std::vector<Vec>& states, const std::vector<int>& actions,
                                const std::vector<double>& returns, double beta,
                                double clip_norm, bool normalize_advantages) {
    const std::size_t T = states.size();
    if (actions.size() != T || returns.size() != T)
        throw DataError("policy_value_update: trace length mismatch");
    agent.policy.zero_grad();
    agent.value.zero_grad();

    UpdateStats stats;
    std::vector<Vec> dists(T);
    std::vector<double> values(T);
    std::vector<Mlp::Cache> pcaches(T), vcaches(T);
    for (std::size_t t = 0; t < T; ++t) {
        dists[t] = agent.policy.forward(states[t], pcaches[t]);
        values[t] = agent.value.forward(states[t], vcaches[t])[0];
    }
    std::vector<double> advs(T);
    for (std::size_t t = 0; t < T; ++t) advs[t] = returns[t] - values[t];  // value detached
    if (normalize_advantages && T > 1) {
        double mean = 0.0;
        for (double a : advs) mean += a;
        mean /= static_cast<double>(T);
        double var = 0.0;
        for (double a : advs) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / static_cast<double>(T)) + 1e-8;
        for (double& a : advs) a = (a - mean) / sd;
    }
    for (std::size_t t = 0; t < T; ++t) {
        const auto a = static_cast<std::size_t>(actions[t]);
        const double adv = advs[t];
        Vec dp(dists[t].size(), 0.0);
        dp[a] = -adv / dists[t][a];
        for (std::size_t j = 0; j < dp.size(); ++j) {
            const double p = dists[t][j];
            dp[j] += beta * (std::log(std::max(p, 1e-300)) + 1.0);
        }
        agent.policy.backward(pcaches[t], dp);
        agent.value.backward(vcaches[t], Vec{2.0 * (values[t] - returns[t])});
        stats.mean_entropy += entropy(dists[t]);
    }
    stats.policy_loss = policy_loss_value(dists, actions, returns, values, beta);
    stats.value_loss = value_loss_value(values, returns);
    stats.mean_entropy /= static_cast<double>(T);
    stats.episode_return = returns.front();
    if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
        throw NumericError("policy_value_update: non-finite loss");

    auto pparams = agent.policy_params();
    auto vparams = agent.value_params();
    nn::clip_grad_norm(pparams, clip_norm);
    nn::clip_grad_norm(vparams, clip_norm);
    policy_opt.step(pparams);
    value_opt.step(vparams);
    return stats;
}

nlohmann::json AgentTrainConfig::to_json() const {
    return {{"gamma", gamma},           {"sigma", sigma},
            {"lambda_scale", lambda_scale}, {"adv_norm", adv_norm},
            {"sigma_rel", sigma_rel}, {"center_alignment", center_alignment},
            {"align_gain", align_gain},
            {"warmup_epochs", warmup_epochs}, {"warmup_lr", warmup_lr},
            {"warmup_content_w", warmup_content_w},
            {"beta", beta},             {"policy_lr", policy_lr},
            {"value_lr", value_lr},     {"epochs", epochs},
            {"s_star_min", s_star_min}, {"s_star_max", s_star_max},
            {"clip_norm", clip_norm},   {"seed", seed}};
}

AgentTrainConfig AgentTrainConfig::from_json(const nlohmann::json& j) {
    AgentTrainConfig c;
    c.gamma = j.value("gamma", c.gamma);
    c.sigma = j.value("sigma", c.sigma);
    c.lambda_scale = j.value("lambda_scale", c.lambda_scale);
    c.adv_norm = j.value("adv_norm", c.adv_norm);
    c.sigma_rel = j.value("sigma_rel", c.sigma_rel);
    c.center_alignment = j.value("center_alignment", c.center_alignment);
    c.align_gain = j.value("align_gain", c.align_gain);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.warmup_lr = j.value("warmup_lr", c.warmup_lr);
    c.warmup_content_w = j.value("warmup_content_w", c.warmup_content_w);
    c.beta = j.value("beta", c.beta);
    c.policy_lr = j.value("policy_lr", c.policy_lr);
    c.value_lr = j.value("value_lr", c.value_lr);
    c.epochs = j.value("epochs", c.epochs);
    c.s_star_min = j.value("s_star_min", c.s_star_min);
    c.s_star_max = j.value("s_star_max", c.s_star_max);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    if (c.gamma <= 0.0 || c.gamma > 1.0) throw ConfigError("train config: gamma out of (0,1]");
    if (c.sigma <= 0.0) throw ConfigError("train config: sigma must be positive");
    if (c.lambda_scale <= 0.0) throw ConfigError("train config: lambda_scale must be positive");
    if (c.sigma_rel < 0.0) throw ConfigError("train config: sigma_rel must be nonnegative");
    if (c.beta < 0.0) throw ConfigError("train config: beta must be nonnegative");
    return c;
}

AgentTrainResult train_agent(const std::vector<VideoSpec>& videos, const Encoder& encoder,
                             Agent& agent, const AgentTrainConfig& cfg,
                             std::ostream* ndjson_log) {
    if (videos.empty()) throw DataError("train_agent: no training videos");
    if (cfg.s_star_min < 1 || cfg.s_star_max > agent.cfg.nu_max ||
        cfg.s_star_min > cfg.s_star_max)
        throw ConfigError("train_agent: invalid target speed-up range");

    nn::Adam policy_opt(cfg.policy_lr);
    nn::Adam value_opt(cfg.value_lr);
    std::mt19937_64 rng(cfg.seed);

    // sentence embeddings are phi-independent; hoist them out of the loop
    std::vector<std::vector<Vec>> all_ps;
    all_ps.reserve(videos.size());
    for (const auto& v : videos) all_ps.push_back(encoder.sentence_embeddings(v.document));

    // Mean alignment per video (sampled on a coarse frame grid). Subtracting
    // it from the step rewards makes a uniform traversal reward-neutral at
    // any speed: slowing down only pays where the content is above average,
    // so the terminal speed term does not have to outbid the alignment sum.
    std::vector<double> align_mean(videos.size(), 0.0);
    if (cfg.center_alignment || cfg.warmup_epochs > 0) {
        for (std::size_t i = 0; i < videos.size(); ++i) {
            const VideoSpec& v = videos[i];
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t f = 1; f <= v.num_frames; f += 4) {
                const Vec phi = clip_at(v, f);
                const Vec e_v = encoder.encode_clip(phi);
                const Vec e_d = encoder.encode_document_from_ps(all_ps[i], phi);
                sum += alignment(e_d, e_v);
                ++n;
            }
            align_mean[i] = sum / static_cast<double>(n);
        }
    }

    // Optional warm start: clone a heuristic controller that slows where the
    // content scores above the video average and corrects toward the target
    // rate otherwise. REINFORCE then refines speed tracking from a policy
    // that already responds to content, which plain exploration almost never
    // discovers (constant-skip is a strong local optimum).
    if (cfg.warmup_epochs > 0) {
        nn::Adam warm_opt(cfg.warmup_lr);
        auto pparams = agent.policy_params();
        for (std::size_t epoch = 1; epoch <= cfg.warmup_epochs; ++epoch) {
            for (std::size_t idx = 0; idx < videos.size(); ++idx) {
                std::uniform_int_distribution<int> sdist(cfg.s_star_min, cfg.s_star_max);
                RolloutOptions opts;
                opts.s_star = sdist(rng);
                const double mean_a = align_mean[idx];
                const double cw = cfg.warmup_content_w;
                opts.teacher = [mean_a, cw](double align, double s_hat, int s_star) {
                    const double u = 0.5 * (s_hat - s_star) + cw * (align - mean_a);
                    if (u > 0.3) return Action::Decelerate;
                    if (u < -0.3) return Action::Accelerate;
                    return Action::DoNothing;
                };
                const EpisodeTrace trace = rollout(videos[idx], encoder, agent, opts, &rng,
                                                   &all_ps[idx]);
                agent.policy.zero_grad();
                const double inv_t = 1.0 / static_cast<double>(trace.actions.size());
                for (std::size_t t = 0; t < trace.actions.size(); ++t) {
                    Mlp::Cache cache;
                    Vec p = agent.policy.forward(trace.states[t], cache);
                    // cross-entropy -log p[a], gradient taken w.r.t. the
                    // softmax output (the net's backward handles the rest)
                    const auto a = static_cast<std::size_t>(trace.actions[t]);
                    Vec dp(p.size(), 0.0);
                    dp[a] = -inv_t / std::max(p[a], 1e-12);
                    agent.policy.backward(cache, dp);
                }
                nn::clip_grad_norm(pparams, cfg.clip_norm);
                warm_opt.step(pparams);
            }
        }
    }

    AgentTrainResult result;
    std::vector<std::size_t> order(videos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        AgentEpochStats stats;
        stats.epoch = epoch;
        for (std::size_t idx : order) {
            const VideoSpec& video = videos[idx];
            std::uniform_int_distribution<int> sdist(cfg.s_star_min, cfg.s_star_max);
            RolloutOptions opts;
            opts.s_star = sdist(rng);
            opts.mode = SelectMode::Sample;
            opts.sigma = cfg.sigma_rel > 0.0 ? cfg.sigma_rel * static_cast<double>(opts.s_star)
                                             : cfg.sigma;
            opts.lambda = cfg.lambda_scale * static_cast<double>(video.num_frames) /
                          static_cast<double>(opts.s_star);
            EpisodeTrace trace;
            try {
                trace = rollout(video, encoder, agent, opts, &rng, &all_ps[idx]);
                if (cfg.center_alignment)
                    for (std::size_t t = 0; t + 1 < trace.rewards.size(); ++t)
                        trace.rewards[t] = cfg.align_gain * (trace.rewards[t] - align_mean[idx]);
                std::vector<int> actions(trace.actions.size());
                for (std::size_t t = 0; t < actions.size(); ++t)
                    actions[t] = static_cast<int>(trace.actions[t]);
                const std::vector<double> returns = discounted_returns(trace.rewards, cfg.gamma);
                const UpdateStats u = policy_value_update(agent, policy_opt, value_opt,
                                                          trace.states, actions, returns,
                                                          cfg.beta, cfg.clip_norm, cfg.adv_norm);
                stats.mean_return += u.episode_return;
                stats.mean_entropy += u.mean_entropy;
                const double os = static_cast<double>(video.num_frames) /
                                  static_cast<double>(trace.length());
                stats.mean_abs_speed_error += std::abs(os - opts.s_star);
            } catch (const NumericError& e) {
                std::string dump = "train_agent aborted: " + std::string(e.what()) +
                                   " (video " + video.id + ", S*=" + std::to_string(opts.s_star) +
                                   ", T=" + std::to_string(trace.length()) + ")";
                throw NumericError(dump);
            }
        }
        const double n = static_cast<double>(videos.size());
        stats.mean_return /= n;
        stats.mean_entropy /= n;
        stats.mean_abs_speed_error /= n;
        stats.wall_time_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        if (ndjson_log) {
            nlohmann::json rec = {{"epoch", stats.epoch},
                                  {"mean_return", stats.mean_return},
                                  {"mean_abs_speed_error", stats.mean_abs_speed_error},
                                  {"mean_entropy", stats.mean_entropy},
                                  {"wall_time_ms", stats.wall_time_ms}};
            (*ndjson_log) << rec.dump() << "\n";
        }
        result.log.push_back(stats);
    }
    return result;
}

}  // namespace ffagent
