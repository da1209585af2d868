#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffagent/layers.hpp"

namespace ffagent {

enum class Action { Decelerate = 0, DoNothing = 1, Accelerate = 2 };
constexpr int kNumActions = 3;

// Skip kinematics: nu frames per step, omega per-step change of nu.
struct Kinematics {
    int nu = 1;
    int omega = 1;
};

struct AgentConfig {
    std::size_t d = 128;  // embedding dim (e_D and e_v)
    std::size_t q = 128;  // NRPE size
    int nu_max = 25;
    int omega_max = 5;

    std::size_t m() const { return static_cast<std::size_t>(2 * nu_max); }
    std::size_t state_dim() const { return 2 * d + q + m(); }

    nlohmann::json to_json() const;
    static AgentConfig from_json(const nlohmann::json& j);
};

// Normalized reversed positional encoding: paired sin/cos of
// (F - f) / F^(2k/q) for k = 1..q/2, stored in dimensions (2k-2, 2k-1).
nn::Vec nrpe(std::size_t f, std::size_t F, std::size_t q);

// One-hot of floor(S_hat) - S_star + nu_max (1-based, clamped into [1, 2*nu_max]).
nn::Vec skip_encoding(double s_hat, int s_star, int nu_max);

nn::Vec compose_state(const nn::Vec& e_doc, const nn::Vec& e_clip, const nn::Vec& e_pos,
                      const nn::Vec& e_skip);

Kinematics apply_action(Kinematics k, Action a, int nu_max = 25, int omega_max = 5);

enum class SelectMode { Sample, Greedy };

Action select_action(const nn::Vec& dist, SelectMode mode, std::mt19937_64* rng);

// Two hidden layers (256, 128), ReLU; head is softmax (policy) or linear (value).
struct Mlp {
    nn::Dense l1, l2, l3;

    Mlp() = default;
    Mlp(std::size_t in, std::size_t out, nn::Activation head, std::mt19937_64& rng);

    struct Cache {
        nn::Dense::Cache c1, c2, c3;
    };

    nn::Vec forward(const nn::Vec& x, Cache& cache) const;
    nn::Vec forward(const nn::Vec& x) const;
    nn::Vec backward(Cache& cache, const nn::Vec& dy);

    void zero_grad();
    void collect(std::vector<nn::ParamRef>& out, const std::string& prefix);
};

struct Agent {
    AgentConfig cfg;
    Mlp policy;
    Mlp value;

    Agent() = default;
    Agent(AgentConfig config, std::mt19937_64& rng);

    nn::Vec policy_forward(const nn::Vec& state) const;
    double value_forward(const nn::Vec& state) const;

    std::vector<nn::ParamRef> policy_params();
    std::vector<nn::ParamRef> value_params();

    void save(const std::string& manifest_path, const std::string& blob_path,
              const nlohmann::json& extra_header = nlohmann::json::object());
    static Agent load(const std::string& manifest_path, const std::string& blob_path);
};

}  // namespace ffagent
