#pragma once

#include <random>
#include <vector>

#include "ffagent/matrix.hpp"

namespace ffagent::nn {

enum class Activation { Linear, Tanh, Relu, Softmax };

// Fully connected layer. Forward caches live with the caller so one layer
// instance can be applied many times per update (e.g. every rollout step).
struct Dense {
    Matrix W;
    Vec b;
    Activation act = Activation::Linear;
    Matrix gW;
    Vec gb;

    Dense() = default;
    Dense(std::size_t out, std::size_t in, Activation a, std::mt19937_64& rng);

    std::size_t in_size() const { return W.cols; }
    std::size_t out_size() const { return W.rows; }

    struct Cache {
        Vec x;
        Vec y;  // post-activation
    };

    Vec forward(const Vec& x, Cache& cache) const;
    Vec forward(const Vec& x) const;  // no cache (inference)

    // Accumulates gW/gb, returns dL/dx.
    Vec backward(const Cache& cache, const Vec& dy);

    void zero_grad();
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
};

// Gated recurrent unit (update gate z, reset gate r, candidate state):
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wh x + Uh (r*h) + bh)
//   h' = (1-z)*h + z*n
struct GruCell {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Matrix Wz, Uz, Wr, Ur, Wh, Uh;
    Vec bz, br, bh;
    Matrix gWz, gUz, gWr, gUr, gWh, gUh;
    Vec gbz, gbr, gbh;

    GruCell() = default;
    GruCell(std::size_t hidden, std::size_t input, std::mt19937_64& rng);

    struct StepCache {
        Vec x, hprev, z, r, n, rh;
    };

    Vec step(const Vec& x, const Vec& hprev, StepCache& cache) const;
    Vec step(const Vec& x, const Vec& hprev) const;

    // Accumulates parameter grads; returns dL/dhprev, adds dL/dx into dx (if non-null).
    Vec backward_step(const StepCache& cache, const Vec& dh, Vec* dx);

    void zero_grad();
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
};

struct GruTape {
    std::vector<GruCell::StepCache> steps;
    std::vector<Vec> states;  // one per input
};

// Left-to-right unroll; one hidden state per input. Empty input is an error.
std::vector<Vec> gru_forward(const GruCell& cell, const std::vector<Vec>& inputs, const Vec& h0,
                             GruTape* tape);

// dstates[t] = dL/dh_t from downstream. Returns dL/dh0; fills dinputs if non-null.
Vec gru_backward(GruCell& cell, const GruTape& tape, const std::vector<Vec>& dstates,
                 std::vector<Vec>* dinputs);

struct BiGruTape {
    GruTape fwd;
    GruTape bwd;
};

// Per-timestep state is [forward_t ; backward_t]; backward consumes reversed input.
std::vector<Vec> bidirectional_encode(const GruCell& fwd, const GruCell& bwd,
                                      const std::vector<Vec>& inputs, const Vec& h0_fwd,
                                      const Vec& h0_bwd, BiGruTape* tape);

std::vector<Vec> bidirectional_backward(GruCell& fwd, GruCell& bwd, const BiGruTape& tape,
                                        const std::vector<Vec>& dstates);

// Soft attention: u_j = tanh(W h_j + b), alpha = softmax(u_j . c), out = sum alpha_j h_j.
struct AttentionPool {
    Matrix W;  // attn_dim x state_dim
    Vec b;
    Vec c;
    Matrix gW;
    Vec gb, gc;

    AttentionPool() = default;
    AttentionPool(std::size_t attn_dim, std::size_t state_dim, std::mt19937_64& rng);

    struct Cache {
        std::vector<Vec> states;
        std::vector<Vec> us;
        Vec alpha;
    };

    Vec forward(const std::vector<Vec>& states, Cache& cache) const;
    Vec forward(const std::vector<Vec>& states, Vec* weights_out = nullptr) const;

    std::vector<Vec> backward(const Cache& cache, const Vec& dpooled);

    void zero_grad();
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
};

// Per-feature batch normalization. Training normalizes with batch statistics
// and updates running stats (momentum 0.9); inference uses frozen stats.
struct BatchNorm {
    std::size_t dim = 0;
    Vec gamma, beta;
    Vec run_mean, run_var;
    double momentum = 0.9;
    double eps = 1e-5;
    bool training = true;
    Vec ggamma, gbeta;
    Vec stat_scratch;  // dummy grad slots for checkpointed running stats

    BatchNorm() = default;
    explicit BatchNorm(std::size_t d);

    struct Cache {
        Matrix xhat;
        Vec mean, var;
    };

    // Rows are samples.
    Matrix forward(const Matrix& X, Cache& cache);
    Vec forward_frozen(const Vec& x) const;

    Matrix backward(const Cache& cache, const Matrix& dY);

    void zero_grad();
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    // Running statistics ride along in checkpoints but take no gradient.
    void collect_stats(std::vector<ParamRef>& out, const std::string& prefix);
};

// y = x / ||x||. Throws NumericError on (near-)zero input.
Vec l2_normalize(const Vec& x);
Vec l2_normalize_backward(const Vec& x, const Vec& dy);

}  // namespace ffagent::nn
