#include "ffagent/saffa.hpp"

#include <algorithm>
#include <cmath>

#include "ffagent/checkpoint.hpp"
#include "ffagent/errors.hpp"

namespace ffagent {

using nn::ParamRef;
using nn::Vec;

nlohmann::json AgentConfig::to_json() const {
    return {{"d", d}, {"q", q}, {"m", m()}, {"nu_max", nu_max}, {"omega_max", omega_max}};
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j) {
    AgentConfig c;
    c.d = j.at("d").get<std::size_t>();
    c.q = j.at("q").get<std::size_t>();
    c.nu_max = j.at("nu_max").get<int>();
    c.omega_max = j.at("omega_max").get<int>();
    if (j.contains("m") && j.at("m").get<std::size_t>() != c.m())
        throw ConfigError("agent config: m does not equal 2*nu_max");
    return c;
}

Vec nrpe(std::size_t f, std::size_t F, std::size_t q) {
    if (f < 1 || f > F)
        throw DataError("nrpe: frame " + std::to_string(f) + " out of range [1, " +
                        std::to_string(F) + "]");
    if (q % 2 != 0 || q == 0) throw ConfigError("nrpe: q must be even and positive");
    Vec e(q);
    const double rev = static_cast<double>(F - f);
    for (std::size_t k = 1; k <= q / 2; ++k) {
        const double denom =
            std::pow(static_cast<double>(F), 2.0 * static_cast<double>(k) / static_cast<double>(q));
        const double arg = rev / denom;
        e[2 * k - 2] = std::sin(arg);
        e[2 * k - 1] = std::cos(arg);
    }
    return e;
}

Vec skip_encoding(double s_hat, int s_star, int nu_max) {
    if (s_star < 1 || s_star > nu_max)
        throw ConfigError("skip_encoding: target speed-up " + std::to_string(s_star) +
                          " out of range [1, " + std::to_string(nu_max) + "]");
    const std::size_t m = static_cast<std::size_t>(2 * nu_max);
    long idx = static_cast<long>(std::floor(s_hat)) - s_star + nu_max;  // 1-based
    idx = std::clamp<long>(idx, 1, static_cast<long>(m));
    Vec e(m, 0.0);
    e[static_cast<std::size_t>(idx - 1)] = 1.0;
    return e;
}

Vec compose_state(const Vec& e_doc, const Vec& e_clip, const Vec& e_pos, const Vec& e_skip) {
    if (e_doc.size() != e_clip.size())
        throw ConfigError("compose_state: e_D and e_v sizes differ");
    Vec s;
    s.reserve(e_doc.size() + e_clip.size() + e_pos.size() + e_skip.size());
    s.insert(s.end(), e_doc.begin(), e_doc.end());
    s.insert(s.end(), e_clip.begin(), e_clip.end());
    s.insert(s.end(), e_pos.begin(), e_pos.end());
    s.insert(s.end(), e_skip.begin(), e_skip.end());
    return s;
}

Kinematics apply_action(Kinematics k, Action a, int nu_max, int omega_max) {
    // velocity updates with the pre-update omega, then omega, then clamp
    switch (a) {
        case Action::Decelerate:
            k.nu -= k.omega;
            k.omega -= 1;
            break;
        case Action::Accelerate:
            k.nu += k.omega;
            k.omega += 1;
            break;
        case Action::DoNothing:
            break;
    }
    k.nu = std::clamp(k.nu, 1, nu_max);
    k.omega = std::clamp(k.omega, 1, omega_max);
    return k;
}

Action select_action(const Vec& dist, SelectMode mode, std::mt19937_64* rng) {
    if (mode == SelectMode::Greedy) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < dist.size(); ++i)
            if (dist[i] > dist[best]) best = i;
        return static_cast<Action>(best);
    }
    if (!rng) throw ConfigError("select_action: sampling requires an rng");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(*rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (r < acc) return static_cast<Action>(i);
    }
    return static_cast<Action>(dist.size() - 1);
}

Mlp::Mlp(std::size_t in, std::size_t out, nn::Activation head, std::mt19937_64& rng)
    : l1(256, in, nn::Activation::Relu, rng),
      l2(128, 256, nn::Activation::Relu, rng),
      l3(out, 128, head, rng) {}

Vec Mlp::forward(const Vec& x, Cache& cache) const {
    return l3.forward(l2.forward(l1.forward(x, cache.c1), cache.c2), cache.c3);
}

Vec Mlp::forward(const Vec& x) const {
    Cache c;
    return forward(x, c);
}

Vec Mlp::backward(Cache& cache, const Vec& dy) {
    return l1.backward(cache.c1, l2.backward(cache.c2, l3.backward(cache.c3, dy)));
}

void Mlp::zero_grad() {
    l1.zero_grad();
    l2.zero_grad();
    l3.zero_grad();
}

void Mlp::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    l1.collect(out, prefix + ".l1");
    l2.collect(out, prefix + ".l2");
    l3.collect(out, prefix + ".l3");
}

Agent::Agent(AgentConfig config, std::mt19937_64& rng)
    : cfg(config),
      policy(config.state_dim(), kNumActions, nn::Activation::Softmax, rng),
      value(config.state_dim(), 1, nn::Activation::Linear, rng) {}

Vec Agent::policy_forward(const Vec& state) const {
    if (state.size() != cfg.state_dim())
        throw ConfigError("policy_forward: state size " + std::to_string(state.size()) +
                          " does not match " + std::to_string(cfg.state_dim()));
    return policy.forward(state);
}

double Agent::value_forward(const Vec& state) const {
    if (state.size() != cfg.state_dim())
        throw ConfigError("value_forward: state size mismatch");
    return value.forward(state)[0];
}

std::vector<ParamRef> Agent::policy_params() {
    std::vector<ParamRef> out;
    policy.collect(out, "policy");
    return out;
}

std::vector<ParamRef> Agent::value_params() {
    std::vector<ParamRef> out;
    value.collect(out, "value");
    return out;
}

void Agent::save(const std::string& manifest_path, const std::string& blob_path,
                 const nlohmann::json& extra_header) {
    nlohmann::json header = extra_header;
    header["kind"] = "agent";
    header["config"] = cfg.to_json();
    std::vector<ParamRef> tensors = policy_params();
    value.collect(tensors, "value");
    nn::save_checkpoint(manifest_path, blob_path, tensors, header);
}

Agent Agent::load(const std::string& manifest_path, const std::string& blob_path) {
    std::map<std::string, nn::Matrix> tensors;
    nlohmann::json header = nn::load_checkpoint_tensors(manifest_path, blob_path, tensors);
    if (header.value("kind", "") != "agent")
        throw DataError("checkpoint is not an agent checkpoint: " + manifest_path);
    AgentConfig cfg = AgentConfig::from_json(header.at("config"));
    std::mt19937_64 rng(0);
    Agent agent(cfg, rng);
    std::vector<ParamRef> refs = agent.policy_params();
    agent.value.collect(refs, "value");
    for (const auto& r : refs) {
        auto it = tensors.find(r.name);
        if (it == tensors.end()) throw DataError("agent checkpoint missing tensor: " + r.name);
        if (it->second.rows != r.rows || it->second.cols != r.cols)
            throw DataError("agent checkpoint tensor shape mismatch: " + r.name);
        std::copy(it->second.data.begin(), it->second.data.end(), r.value);
    }
    return agent;
}

}  // namespace ffagent
