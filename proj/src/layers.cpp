#include "ffagent/layers.hpp"

#include <algorithm>
#include <cmath>

namespace ffagent::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec gate_pre(const Matrix& W, const Matrix& U, const Vec& b, const Vec& x, const Vec& h) {
    Vec a = matvec(W, x);
    Vec uh = matvec(U, h);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += uh[i] + b[i];
    return a;
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t out, std::size_t in, Activation a, std::mt19937_64& rng)
    : W(uniform_init(out, in, in, rng)),
      b(uniform_init(out, 1, in, rng).data),
      act(a),
      gW(out, in),
      gb(out, 0.0) {}

Vec Dense::forward(const Vec& x, Cache& cache) const {
    if (x.size() != W.cols)
        throw ConfigError("dense: input size " + std::to_string(x.size()) + " does not match " +
                          std::to_string(W.cols));
    Vec z = matvec(W, x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += b[i];
    switch (act) {
        case Activation::Linear:
            break;
        case Activation::Tanh:
            for (auto& v : z) v = std::tanh(v);
            break;
        case Activation::Relu:
            for (auto& v : z) v = std::max(0.0, v);
            break;
        case Activation::Softmax:
            z = softmax(z);
            break;
    }
    cache.x = x;
    cache.y = z;
    return z;
}

Vec Dense::forward(const Vec& x) const {
    Cache c;
    return forward(x, c);
}

Vec Dense::backward(const Cache& cache, const Vec& dy) {
    if (cache.x.empty() && W.cols != 0)
        throw NumericError("dense: backward called before forward");
    const Vec& y = cache.y;
    Vec dz(dy.size());
    switch (act) {
        case Activation::Linear:
            dz = dy;
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < dy.size(); ++i) dz[i] = dy[i] * (1.0 - y[i] * y[i]);
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < dy.size(); ++i) dz[i] = y[i] > 0.0 ? dy[i] : 0.0;
            break;
        case Activation::Softmax: {
            // dz = (diag(p) - p p^T) dy
            const double s = dot(y, dy);
            for (std::size_t i = 0; i < dy.size(); ++i) dz[i] = y[i] * (dy[i] - s);
            break;
        }
    }
    add_outer(gW, dz, cache.x);
    axpy(1.0, dz, gb);
    return matvec_t(W, dz);
}

void Dense::zero_grad() {
    gW.fill(0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
}

void Dense::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back(param_ref(prefix + ".W", W, gW));
    out.push_back(param_ref(prefix + ".b", b, gb));
}

// ---------------------------------------------------------------- GruCell

GruCell::GruCell(std::size_t hidden, std::size_t input, std::mt19937_64& rng)
    : input_size(input),
      hidden_size(hidden),
      Wz(uniform_init(hidden, input, input, rng)),
      Uz(uniform_init(hidden, hidden, hidden, rng)),
      Wr(uniform_init(hidden, input, input, rng)),
      Ur(uniform_init(hidden, hidden, hidden, rng)),
      Wh(uniform_init(hidden, input, input, rng)),
      Uh(uniform_init(hidden, hidden, hidden, rng)),
      bz(hidden, 0.0),
      br(hidden, 0.0),
      bh(hidden, 0.0),
      gWz(hidden, input),
      gUz(hidden, hidden),
      gWr(hidden, input),
      gUr(hidden, hidden),
      gWh(hidden, input),
      gUh(hidden, hidden),
      gbz(hidden, 0.0),
      gbr(hidden, 0.0),
      gbh(hidden, 0.0) {}

Vec GruCell::step(const Vec& x, const Vec& hprev, StepCache& cache) const {
    if (x.size() != input_size || hprev.size() != hidden_size)
        throw ConfigError("gru: step size mismatch (input " + std::to_string(x.size()) +
                          ", hidden " + std::to_string(hprev.size()) + ")");
    Vec z = gate_pre(Wz, Uz, bz, x, hprev);
    Vec r = gate_pre(Wr, Ur, br, x, hprev);
    for (auto& v : z) v = sigmoid(v);
    for (auto& v : r) v = sigmoid(v);
    Vec rh(hidden_size);
    for (std::size_t i = 0; i < hidden_size; ++i) rh[i] = r[i] * hprev[i];
    Vec n = gate_pre(Wh, Uh, bh, x, rh);
    for (auto& v : n) v = std::tanh(v);
    Vec h(hidden_size);
    for (std::size_t i = 0; i < hidden_size; ++i)
        h[i] = (1.0 - z[i]) * hprev[i] + z[i] * n[i];
    cache = StepCache{x, hprev, z, r, n, rh};
    return h;
}

Vec GruCell::step(const Vec& x, const Vec& hprev) const {
    StepCache c;
    return step(x, hprev, c);
}

Vec GruCell::backward_step(const StepCache& cache, const Vec& dh, Vec* dx) {
    const std::size_t H = hidden_size;
    Vec dn(H), dz(H), dhprev(H);
    for (std::size_t i = 0; i < H; ++i) {
        dn[i] = dh[i] * cache.z[i];
        dz[i] = dh[i] * (cache.n[i] - cache.hprev[i]);
        dhprev[i] = dh[i] * (1.0 - cache.z[i]);
    }
    // candidate, pre-tanh
    Vec dan(H);
    for (std::size_t i = 0; i < H; ++i) dan[i] = dn[i] * (1.0 - cache.n[i] * cache.n[i]);
    add_outer(gWh, dan, cache.x);
    add_outer(gUh, dan, cache.rh);
    axpy(1.0, dan, gbh);
    Vec drh = matvec_t(Uh, dan);
    Vec dr(H);
    for (std::size_t i = 0; i < H; ++i) {
        dr[i] = drh[i] * cache.hprev[i];
        dhprev[i] += drh[i] * cache.r[i];
    }
    // gates, pre-sigmoid
    Vec daz(H), dar(H);
    for (std::size_t i = 0; i < H; ++i) {
        daz[i] = dz[i] * cache.z[i] * (1.0 - cache.z[i]);
        dar[i] = dr[i] * cache.r[i] * (1.0 - cache.r[i]);
    }
    add_outer(gWz, daz, cache.x);
    add_outer(gUz, daz, cache.hprev);
    axpy(1.0, daz, gbz);
    add_outer(gWr, dar, cache.x);
    add_outer(gUr, dar, cache.hprev);
    axpy(1.0, dar, gbr);
    Vec t = matvec_t(Uz, daz);
    axpy(1.0, t, dhprev);
    t = matvec_t(Ur, dar);
    axpy(1.0, t, dhprev);
    if (dx) {
        Vec d = matvec_t(Wh, dan);
        axpy(1.0, d, *dx);
        d = matvec_t(Wz, daz);
        axpy(1.0, d, *dx);
        d = matvec_t(Wr, dar);
        axpy(1.0, d, *dx);
    }
    return dhprev;
}

void GruCell::zero_grad() {
    gWz.fill(0.0);
    gUz.fill(0.0);
    gWr.fill(0.0);
    gUr.fill(0.0);
    gWh.fill(0.0);
    gUh.fill(0.0);
    std::fill(gbz.begin(), gbz.end(), 0.0);
    std::fill(gbr.begin(), gbr.end(), 0.0);
    std::fill(gbh.begin(), gbh.end(), 0.0);
}

void GruCell::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back(param_ref(prefix + ".Wz", Wz, gWz));
    out.push_back(param_ref(prefix + ".Uz", Uz, gUz));
    out.push_back(param_ref(prefix + ".bz", bz, gbz));
    out.push_back(param_ref(prefix + ".Wr", Wr, gWr));
    out.push_back(param_ref(prefix + ".Ur", Ur, gUr));
    out.push_back(param_ref(prefix + ".br", br, gbr));
    out.push_back(param_ref(prefix + ".Wh", Wh, gWh));
    out.push_back(param_ref(prefix + ".Uh", Uh, gUh));
    out.push_back(param_ref(prefix + ".bh", bh, gbh));
}

std::vector<Vec> gru_forward(const GruCell& cell, const std::vector<Vec>& inputs, const Vec& h0,
                             GruTape* tape) {
    if (inputs.empty()) throw DataError("gru: empty input sequence");
    if (h0.size() != cell.hidden_size) throw ConfigError("gru: h0 size mismatch");
    std::vector<Vec> states;
    states.reserve(inputs.size());
    Vec h = h0;
    for (const Vec& x : inputs) {
        GruCell::StepCache c;
        h = cell.step(x, h, c);
        states.push_back(h);
        if (tape) tape->steps.push_back(std::move(c));
    }
    if (tape) tape->states = states;
    return states;
}

Vec gru_backward(GruCell& cell, const GruTape& tape, const std::vector<Vec>& dstates,
                 std::vector<Vec>* dinputs) {
    const std::size_t T = tape.steps.size();
    if (dinputs) dinputs->assign(T, Vec(cell.input_size, 0.0));
    Vec dh(cell.hidden_size, 0.0);
    for (std::size_t ti = T; ti-- > 0;) {
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dstates[ti][i];
        dh = cell.backward_step(tape.steps[ti], dh, dinputs ? &(*dinputs)[ti] : nullptr);
    }
    return dh;
}

std::vector<Vec> bidirectional_encode(const GruCell& fwd, const GruCell& bwd,
                                      const std::vector<Vec>& inputs, const Vec& h0_fwd,
                                      const Vec& h0_bwd, BiGruTape* tape) {
    std::vector<Vec> fstates = gru_forward(fwd, inputs, h0_fwd, tape ? &tape->fwd : nullptr);
    std::vector<Vec> rev(inputs.rbegin(), inputs.rend());
    std::vector<Vec> bstates = gru_forward(bwd, rev, h0_bwd, tape ? &tape->bwd : nullptr);
    const std::size_t T = inputs.size();
    std::vector<Vec> out(T);
    for (std::size_t t = 0; t < T; ++t) out[t] = concat(fstates[t], bstates[T - 1 - t]);
    return out;
}

std::vector<Vec> bidirectional_backward(GruCell& fwd, GruCell& bwd, const BiGruTape& tape,
                                        const std::vector<Vec>& dstates) {
    const std::size_t T = dstates.size();
    const std::size_t H = fwd.hidden_size;
    std::vector<Vec> dfwd(T, Vec(H, 0.0)), dbwd(T, Vec(bwd.hidden_size, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < H; ++i) dfwd[t][i] = dstates[t][i];
        for (std::size_t i = 0; i < bwd.hidden_size; ++i)
            dbwd[T - 1 - t][i] = dstates[t][H + i];
    }
    std::vector<Vec> dxf, dxb;
    gru_backward(fwd, tape.fwd, dfwd, &dxf);
    gru_backward(bwd, tape.bwd, dbwd, &dxb);
    std::vector<Vec> dinputs(T, Vec(fwd.input_size, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        dinputs[t] = dxf[t];
        axpy(1.0, dxb[T - 1 - t], dinputs[t]);
    }
    return dinputs;
}

// ---------------------------------------------------------------- AttentionPool

AttentionPool::AttentionPool(std::size_t attn_dim, std::size_t state_dim, std::mt19937_64& rng)
    : W(uniform_init(attn_dim, state_dim, state_dim, rng)),
      b(attn_dim, 0.0),
      c(attn_dim, 0.0),
      gW(attn_dim, state_dim),
      gb(attn_dim, 0.0),
      gc(attn_dim, 0.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : c) v = nd(rng);
    c = l2_normalize(c);
}

Vec AttentionPool::forward(const std::vector<Vec>& states, Cache& cache) const {
    if (states.empty()) throw DataError("attention_pool: empty state sequence");
    const std::size_t T = states.size();
    std::vector<Vec> us(T);
    Vec scores(T);
    for (std::size_t t = 0; t < T; ++t) {
        Vec u = matvec(W, states[t]);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::tanh(u[i] + b[i]);
        scores[t] = dot(u, c);
        us[t] = std::move(u);
    }
    Vec alpha = softmax(scores);
    Vec pooled(states[0].size(), 0.0);
    for (std::size_t t = 0; t < T; ++t) axpy(alpha[t], states[t], pooled);
    cache = Cache{states, std::move(us), std::move(alpha)};
    return pooled;
}

Vec AttentionPool::forward(const std::vector<Vec>& states, Vec* weights_out) const {
    Cache cache;
    Vec pooled = forward(states, cache);
    if (weights_out) *weights_out = cache.alpha;
    return pooled;
}

std::vector<Vec> AttentionPool::backward(const Cache& cache, const Vec& dpooled) {
    const std::size_t T = cache.states.size();
    Vec dalpha(T);
    std::vector<Vec> dstates(T, Vec(cache.states[0].size(), 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        dalpha[t] = dot(dpooled, cache.states[t]);
        axpy(cache.alpha[t], dpooled, dstates[t]);
    }
    // softmax jacobian
    double s = dot(cache.alpha, dalpha);
    Vec dscores(T);
    for (std::size_t t = 0; t < T; ++t) dscores[t] = cache.alpha[t] * (dalpha[t] - s);
    for (std::size_t t = 0; t < T; ++t) {
        // score_t = u_t . c
        axpy(dscores[t], cache.us[t], gc);
        Vec du(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) du[i] = dscores[t] * c[i];
        Vec da(c.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            da[i] = du[i] * (1.0 - cache.us[t][i] * cache.us[t][i]);
        add_outer(gW, da, cache.states[t]);
        axpy(1.0, da, gb);
        Vec dh = matvec_t(W, da);
        axpy(1.0, dh, dstates[t]);
    }
    return dstates;
}

void AttentionPool::zero_grad() {
    gW.fill(0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    std::fill(gc.begin(), gc.end(), 0.0);
}

void AttentionPool::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back(param_ref(prefix + ".W", W, gW));
    out.push_back(param_ref(prefix + ".b", b, gb));
    out.push_back(param_ref(prefix + ".c", c, gc));
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t d)
    : dim(d),
      gamma(d, 1.0),
      beta(d, 0.0),
      run_mean(d, 0.0),
      run_var(d, 1.0),
      ggamma(d, 0.0),
      gbeta(d, 0.0) {}

Matrix BatchNorm::forward(const Matrix& X, Cache& cache) {
    if (X.cols != dim) throw ConfigError("batchnorm: feature size mismatch");
    const std::size_t B = X.rows;
    Matrix Y(B, dim);
    if (!training) {
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                Y.at(i, j) = gamma[j] * (X.at(i, j) - run_mean[j]) /
                                 std::sqrt(run_var[j] + eps) +
                             beta[j];
        return Y;
    }
    Vec mean(dim, 0.0), var(dim, 0.0);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += X.at(i, j);
    for (auto& v : mean) v /= static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = X.at(i, j) - mean[j];
            var[j] += d * d;
        }
    for (auto& v : var) v /= static_cast<double>(B);
    Matrix xhat(B, dim);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            xhat.at(i, j) = (X.at(i, j) - mean[j]) / std::sqrt(var[j] + eps);
            Y.at(i, j) = gamma[j] * xhat.at(i, j) + beta[j];
        }
    for (std::size_t j = 0; j < dim; ++j) {
        run_mean[j] = momentum * run_mean[j] + (1.0 - momentum) * mean[j];
        run_var[j] = momentum * run_var[j] + (1.0 - momentum) * var[j];
    }
    cache = Cache{std::move(xhat), std::move(mean), std::move(var)};
    return Y;
}

Vec BatchNorm::forward_frozen(const Vec& x) const {
    if (x.size() != dim) throw ConfigError("batchnorm: feature size mismatch");
    Vec y(dim);
    for (std::size_t j = 0; j < dim; ++j)
        y[j] = gamma[j] * (x[j] - run_mean[j]) / std::sqrt(run_var[j] + eps) + beta[j];
    return y;
}

Matrix BatchNorm::backward(const Cache& cache, const Matrix& dY) {
    const std::size_t B = dY.rows;
    Matrix dX(B, dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const double istd = 1.0 / std::sqrt(cache.var[j] + eps);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < B; ++i) {
            const double dy = dY.at(i, j);
            sum_dy += dy;
            sum_dy_xhat += dy * cache.xhat.at(i, j);
            ggamma[j] += dy * cache.xhat.at(i, j);
            gbeta[j] += dy;
        }
        const double Bn = static_cast<double>(B);
        for (std::size_t i = 0; i < B; ++i) {
            const double dy = dY.at(i, j);
            dX.at(i, j) = gamma[j] * istd *
                          (dy - sum_dy / Bn - cache.xhat.at(i, j) * sum_dy_xhat / Bn);
        }
    }
    return dX;
}

void BatchNorm::zero_grad() {
    std::fill(ggamma.begin(), ggamma.end(), 0.0);
    std::fill(gbeta.begin(), gbeta.end(), 0.0);
}

void BatchNorm::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back(param_ref(prefix + ".gamma", gamma, ggamma));
    out.push_back(param_ref(prefix + ".beta", beta, gbeta));
}

void BatchNorm::collect_stats(std::vector<ParamRef>& out, const std::string& prefix) {
    stat_scratch.assign(dim * 2, 0.0);
    out.push_back(ParamRef{prefix + ".run_mean", dim, 1, run_mean.data(), stat_scratch.data()});
    out.push_back(
        ParamRef{prefix + ".run_var", dim, 1, run_var.data(), stat_scratch.data() + dim});
}

// ---------------------------------------------------------------- L2 norm

Vec l2_normalize(const Vec& x) {
    const double n = norm2(x);
    if (n < 1e-12) throw NumericError("l2_normalize: zero vector");
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / n;
    return y;
}

Vec l2_normalize_backward(const Vec& x, const Vec& dy) {
    const double n = norm2(x);
    if (n < 1e-12) throw NumericError("l2_normalize: zero vector");
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / n;
    const double s = dot(y, dy);
    Vec dx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = (dy[i] - y[i] * s) / n;
    return dx;
}

}  // namespace ffagent::nn
