// End-to-end acceptance suite. Each numbered criterion prints one PASS/FAIL
// line; the exit code is the number of failures. Later criteria reuse the
// encoder and agent trained in earlier ones.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ffagent/corpus.hpp"
#include "ffagent/encoder.hpp"
#include "ffagent/encoder_train.hpp"
#include "ffagent/env.hpp"
#include "ffagent/gradcheck.hpp"
#include "ffagent/metrics.hpp"
#include "ffagent/rltrain.hpp"
#include "ffagent/saffa.hpp"

using namespace ffagent;
using nn::Vec;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++g_failures;
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 2

EncoderConfig grad_encoder_config() {
    EncoderConfig cfg;
    cfg.word_dim = 5;
    cfg.sent_hidden = 4;
    cfg.z = 8;
    cfg.attn_dim = 6;
    cfg.embed_dim = 4;
    cfg.proj_hidden = 6;
    return cfg;
}

// Full encoder loss (both documents and both projection heads) against
// finite differences; exercises embeddings, both GRU levels, both attention
// poolers, batch norm and the L2 step.
double encoder_grad_err(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EncoderConfig cfg = grad_encoder_config();
    Vocabulary vocab(cfg.word_dim, rng);
    for (const char* t : {"wash", "the", "tomato", "cut", "onion", "stir"}) vocab.add(t, rng);
    Encoder enc(cfg, std::move(vocab), rng);
    enc.set_training(true);

    Document doc1 = make_document({"wash the tomato", "cut the onion"});
    Document doc2 = make_document({"stir the onion", "wash the tomato", "cut"});
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec phi1(cfg.z), phi2(cfg.z);
    for (auto& x : phi1) x = nd(rng);
    for (auto& x : phi2) x = nd(rng);
    const std::vector<int> labels = {+1, -1};

    auto loss_fn = [&]() {
        Encoder::DocumentCache c1, c2;
        std::vector<Vec> ds = {enc.document_forward(doc1, phi1, &c1),
                               enc.document_forward(doc2, phi2, &c2)};
        ProjectionHead::Cache dc, cc;
        std::vector<Vec> eds = enc.doc_head.forward_batch(ds, dc);
        std::vector<Vec> evs = enc.clip_head.forward_batch({phi1, phi2}, cc);
        double loss = 0.0;
        for (int i = 0; i < 2; ++i) loss += cosine_embedding_loss(eds[i], evs[i], labels[i], 0.0);
        return loss;
    };
    auto grad_fn = [&]() {
        enc.zero_grad();
        Encoder::DocumentCache c1, c2;
        std::vector<Vec> ds = {enc.document_forward(doc1, phi1, &c1),
                               enc.document_forward(doc2, phi2, &c2)};
        ProjectionHead::Cache dc, cc;
        std::vector<Vec> eds = enc.doc_head.forward_batch(ds, dc);
        std::vector<Vec> evs = enc.clip_head.forward_batch({phi1, phi2}, cc);
        std::vector<Vec> dd(2), dv(2);
        for (int i = 0; i < 2; ++i)
            cosine_embedding_loss_grad(eds[i], evs[i], labels[i], 0.0, dd[i], dv[i]);
        std::vector<Vec> dds = enc.doc_head.backward_batch(dc, dd);
        enc.clip_head.backward_batch(cc, dv);
        enc.document_backward(c1, dds[0]);
        enc.document_backward(c2, dds[1]);
    };
    auto params = enc.trainable_params();
    return nn::gradient_check(params, loss_fn, grad_fn).max_rel_err;
}

double agent_grad_err(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AgentConfig cfg;
    cfg.d = 4;
    cfg.q = 4;
    cfg.nu_max = 3;
    cfg.omega_max = 2;
    Agent agent(cfg, rng);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Vec> states(4, Vec(cfg.state_dim()));
    for (auto& s : states)
        for (auto& x : s) x = nd(rng);
    const std::vector<int> actions{0, 2, 1, 2};
    const std::vector<double> returns{1.5, -0.5, 2.0, 0.25};
    const std::vector<double> values{0.5, 0.0, 1.0, -0.25};
    const double beta = 0.01;

    auto ploss = [&]() {
        std::vector<Vec> dists;
        for (const auto& s : states) dists.push_back(agent.policy_forward(s));
        return policy_loss_value(dists, actions, returns, values, beta);
    };
    auto pgrad = [&]() {
        agent.policy.zero_grad();
        for (std::size_t t = 0; t < states.size(); ++t) {
            Mlp::Cache cache;
            Vec p = agent.policy.forward(states[t], cache);
            const auto a = static_cast<std::size_t>(actions[t]);
            Vec dp(p.size(), 0.0);
            dp[a] = -(returns[t] - values[t]) / p[a];
            for (std::size_t j = 0; j < dp.size(); ++j) dp[j] += beta * (std::log(p[j]) + 1.0);
            agent.policy.backward(cache, dp);
        }
    };
    // The policy/value MLPs have ~38k parameters each; checking every 13th
    // coordinate keeps the suite well inside its time budget while still
    // probing every tensor.
    const std::size_t stride = 13;
    auto pparams = agent.policy_params();
    double err = nn::gradient_check(pparams, ploss, pgrad, 1e-5, stride).max_rel_err;

    auto vloss = [&]() {
        std::vector<double> vs;
        for (const auto& s : states) vs.push_back(agent.value_forward(s));
        return value_loss_value(vs, returns);
    };
    auto vgrad = [&]() {
        agent.value.zero_grad();
        for (std::size_t t = 0; t < states.size(); ++t) {
            Mlp::Cache cache;
            const double v = agent.value.forward(states[t], cache)[0];
            agent.value.backward(cache, Vec{2.0 * (v - returns[t])});
        }
    };
    auto vparams = agent.value_params();
    err = std::max(err, nn::gradient_check(vparams, vloss, vgrad, 1e-5, stride).max_rel_err);
    return err;
}

// ---------------------------------------------------------------- criterion 5

struct SkipStats {
    double in_gap_sum = 0.0, out_gap_sum = 0.0;
    std::size_t in_count = 0, out_count = 0;
};

bool frame_in_segments(std::size_t f, const std::vector<std::pair<int, int>>& segs) {
    for (const auto& [a, b] : segs)
        if (static_cast<int>(f) >= a && static_cast<int>(f) <= b) return true;
    return false;
}

// Uniform-skip baseline at (approximately) the same output speed-up: the
// same number of frames spread evenly over the video.
std::vector<std::size_t> uniform_selection(std::size_t num_frames, std::size_t count) {
    std::vector<std::size_t> out;
    if (count == 0) return out;
    if (count == 1) return {1};
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < count; ++i) {
        const double pos = 1.0 + static_cast<double>(i) *
                                     (static_cast<double>(num_frames) - 1.0) /
                                     (static_cast<double>(count) - 1.0);
        const auto f = static_cast<std::size_t>(std::llround(pos));
        if (seen.insert(f).second) out.push_back(f);
    }
    return out;
}

}  // namespace

int main() {
    const auto suite_t0 = std::chrono::steady_clock::now();

    // ------------------------------------------------------------ criterion 1
    {
        const double a = overall_performance(0.1786, 11.68, 12);
        const double b = overall_performance(0.1886, 11.90, 12);
        const bool ok = std::abs(a - 0.3007) < 5e-4 && std::abs(b - 0.3171) < 5e-4;
        report(1, "overall-performance reference points", ok,
               "op=" + fmt(a) + "," + fmt(b));
    }

    // ------------------------------------------------------------ criterion 2
    {
        const auto t0 = std::chrono::steady_clock::now();
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            worst = std::max(worst, encoder_grad_err(1000 + seed));
            worst = std::max(worst, agent_grad_err(2000 + seed));
        }
        const double secs = seconds_since(t0);
        const bool ok = worst < 1e-4 && secs < 60.0;
        report(2, "gradient checks across all learned components", ok,
               "max_rel_err=" + fmt(worst) + ", " + fmt(secs) + "s");
    }

    // ------------------------------------------------------------ criterion 3
    LibraryConfig lib_cfg;  // 64 topics, z=64
    TopicLibrary library = make_topic_library(lib_cfg);

    SynthCorpusConfig corpus_cfg;
    corpus_cfg.library = lib_cfg;
    corpus_cfg.n_clips = 480;
    corpus_cfg.captions_per_clip = 4;
    corpus_cfg.noise = 0.05;
    Corpus corpus = generate_corpus(corpus_cfg, library);

    EncoderConfig enc_cfg;  // desk-scale defaults
    std::mt19937_64 enc_rng(101);
    Encoder encoder(enc_cfg, build_vocabulary(corpus, enc_cfg.word_dim, 101), enc_rng);
    {
        const auto t0 = std::chrono::steady_clock::now();
        EncoderTrainConfig tc;
        tc.epochs = 100;
        tc.lr = 1e-3;
        tc.lr_decay = 0.97;
        tc.pairs_per_clip = 2;
        tc.target_val_auc = 0.97;  // early stop once comfortably past the bar
        EncoderTrainResult res = train_encoder(encoder, corpus, tc, nullptr);
        const double secs = seconds_since(t0);
        const bool ok = res.final_val_auc >= 0.90 && secs < 300.0;
        report(3, "cross-modal retrieval on held-out clips", ok,
               "clips=480, auc=" + fmt(res.final_val_auc) + ", " + fmt(secs) + "s");
    }

    // ------------------------------------------------------------ criterion 4
    SynthVideoConfig vid_cfg;
    vid_cfg.library = lib_cfg;
    vid_cfg.n_videos = 30;
    vid_cfg.seed = 33;
    std::vector<VideoSpec> train_videos = generate_videos(vid_cfg, library);
    SynthVideoConfig held_cfg = vid_cfg;
    held_cfg.n_videos = 20;
    held_cfg.seed = 34;
    std::vector<VideoSpec> held_videos = generate_videos(held_cfg, library);

    AgentConfig agent_cfg;  // d=128 matches the encoder embedding
    std::mt19937_64 agent_rng(202);
    Agent agent(agent_cfg, agent_rng);

    std::vector<std::vector<Vec>> held_ps;
    for (const auto& v : held_videos) held_ps.push_back(encoder.sentence_embeddings(v.document));

    {
        const auto t0 = std::chrono::steady_clock::now();
        AgentTrainConfig tc;
        // Behavior-clone a content-aware heuristic first (slow down where the
        // alignment runs above the video average, correct toward the target
        // rate otherwise), then refine with REINFORCE. Plain policy-gradient
        // training from scratch reliably converges to a constant skip rate:
        // per-step alignment rewards are positive on average, so the return
        // is maximized either by decelerating everywhere (if the terminal
        // term is weak) or by ignoring content (if it is strong). Centering
        // the alignment per video and warm-starting sidestep both traps.
        tc.warmup_epochs = 60;
        tc.warmup_content_w = 3.5;
        tc.epochs = 2;
        tc.policy_lr = 3e-4;
        tc.value_lr = 1e-3;
        tc.gamma = 1.0;
        tc.lambda_scale = 5.0;
        tc.sigma = 2.0;
        tc.beta = 0.003;
        tc.adv_norm = true;
        tc.center_alignment = true;
        tc.align_gain = 2.0;
        train_agent(train_videos, encoder, agent, tc, nullptr);

        double worst_mean = 0.0;
        std::string per_target;
        for (int s_star : {2, 4, 8, 12, 16, 20}) {
            double err = 0.0;
            for (std::size_t i = 0; i < held_videos.size(); ++i) {
                RolloutOptions opts;
                opts.s_star = s_star;
                opts.keep_states = false;
                EpisodeTrace t = rollout(held_videos[i], encoder, agent, opts, nullptr,
                                         &held_ps[i]);
                err += std::abs(t.s_hat_final - s_star);
            }
            err /= static_cast<double>(held_videos.size());
            worst_mean = std::max(worst_mean, err);
            if (!per_target.empty()) per_target += "/";
            per_target += fmt(err);
        }
        const double secs = seconds_since(t0);
        const bool ok = worst_mean <= 2.0 && secs < 1200.0;
        report(4, "speed tracking on held-out videos", ok,
               "mean|err|=" + per_target + ", " + fmt(secs) + "s");
    }

    // ------------------------------------------------------------ criterion 5
    {
        SkipStats skip;
        double agent_f1 = 0.0, base_f1 = 0.0, max_os_gap = 0.0;
        std::size_t n_eval = 0;
        for (std::size_t i = 0; i < held_videos.size(); ++i) {
            const VideoSpec& v = held_videos[i];
            RolloutOptions opts;
            opts.s_star = 12;
            opts.keep_states = false;
            EpisodeTrace t = rollout(v, encoder, agent, opts, nullptr, &held_ps[i]);
            for (std::size_t k = 0; k + 1 < t.frames.size(); ++k) {
                const double gap = static_cast<double>(t.frames[k + 1] - t.frames[k]);
                if (frame_in_segments(t.frames[k], v.segments)) {
                    skip.in_gap_sum += gap;
                    ++skip.in_count;
                } else {
                    skip.out_gap_sum += gap;
                    ++skip.out_count;
                }
            }
            const PRF agent_prf = precision_recall_f1(t.frames, v.segments, v.num_frames);
            const double os_agent = output_speedup(v.num_frames, t.frames.size());
            std::vector<std::size_t> base = uniform_selection(v.num_frames, t.frames.size());
            const double os_base = output_speedup(v.num_frames, base.size());
            max_os_gap = std::max(max_os_gap, std::abs(os_base - os_agent));
            const PRF base_prf = precision_recall_f1(base, v.segments, v.num_frames);
            agent_f1 += agent_prf.f1;
            base_f1 += base_prf.f1;
            ++n_eval;
        }
        agent_f1 /= static_cast<double>(n_eval);
        base_f1 /= static_cast<double>(n_eval);
        const double in_skip = skip.in_gap_sum / static_cast<double>(skip.in_count);
        const double out_skip = skip.out_gap_sum / static_cast<double>(skip.out_count);
        const bool ok = in_skip <= 0.8 * out_skip && agent_f1 >= 1.1 * base_f1 &&
                        max_os_gap <= 0.5;
        report(5, "content-adaptive skipping beats uniform sampling", ok,
               "skip in/out=" + fmt(in_skip) + "/" + fmt(out_skip) + ", f1 agent/uniform=" +
                   fmt(agent_f1) + "/" + fmt(base_f1) + ", os_gap=" + fmt(max_os_gap));
    }

    // ------------------------------------------------------------ criterion 6
    {
        bool ok = true;
        std::string why = "ok";
        // kinematics closure over 10^4 random sequences
        std::mt19937_64 rng(303);
        std::uniform_int_distribution<int> ua(0, 2);
        for (int seq = 0; seq < 10000 && ok; ++seq) {
            Kinematics k;
            for (int i = 0; i < 20; ++i) {
                k = apply_action(k, static_cast<Action>(ua(rng)));
                if (k.nu < 1 || k.nu > 25 || k.omega < 1 || k.omega > 5) {
                    ok = false;
                    why = "kinematics left the valid range";
                    break;
                }
            }
        }
        // episode invariants over 10^2 sampled rollouts
        std::uniform_int_distribution<std::size_t> uvid(0, held_videos.size() - 1);
        std::uniform_int_distribution<int> ustar(2, 20);
        for (int rep = 0; rep < 100 && ok; ++rep) {
            const std::size_t vi = uvid(rng);
            const VideoSpec& v = held_videos[vi];
            RolloutOptions opts;
            opts.s_star = ustar(rng);
            opts.mode = SelectMode::Sample;
            opts.keep_states = false;
            EpisodeTrace t = rollout(v, encoder, agent, opts, &rng, &held_ps[vi]);
            if (t.frames.empty() || t.frames.front() != 1 || t.frames.back() > v.num_frames ||
                t.rewards.size() != t.frames.size()) {
                ok = false;
                why = "trace shape violated";
                break;
            }
            for (std::size_t k = 1; k < t.frames.size(); ++k) {
                const std::size_t gap = t.frames[k] - t.frames[k - 1];
                if (t.frames[k] <= t.frames[k - 1] || gap > 25) {
                    ok = false;
                    why = "frame gaps left [1, nu_max]";
                    break;
                }
            }
            for (std::size_t k = 0; ok && k + 1 < t.rewards.size(); ++k)
                if (t.rewards[k] < -1.0 - 1e-9 || t.rewards[k] > 1.0 + 1e-9) {
                    ok = false;
                    why = "non-terminal reward left [-1, 1]";
                }
            if (ok && t.rewards.back() <= 0.0) {
                ok = false;
                why = "terminal reward not positive";
            }
            // return recurrence to 1e-12
            const std::vector<double> R = discounted_returns(t.rewards, 0.99);
            for (std::size_t k = 0; ok && k + 1 < R.size(); ++k)
                if (std::abs(R[k] - (t.rewards[k] + 0.99 * R[k + 1])) > 1e-12) {
                    ok = false;
                    why = "return recurrence broke 1e-12";
                }
        }
        report(6, "episode and kinematics invariants", ok, why);
    }

    // ------------------------------------------------------------ criterion 7
    {
        bool ok = true;
        std::string why = "ok";
        // AUC against the pair-counting definition, 100 random instances
        std::mt19937_64 rng(404);
        std::uniform_int_distribution<int> un(10, 1000);
        std::uniform_real_distribution<double> us(0.0, 1.0);
        std::uniform_int_distribution<int> ul(0, 1);
        std::uniform_int_distribution<int> grid(0, 15);
        for (int inst = 0; inst < 100 && ok; ++inst) {
            const int n = un(rng);
            std::vector<double> scores(n);
            std::vector<int> labels(n);
            int pos = 0;
            for (int i = 0; i < n; ++i) {
                scores[i] = inst % 2 == 0 ? us(rng) : grid(rng) / 15.0;
                labels[i] = ul(rng);
                pos += labels[i];
            }
            if (pos == 0) labels[0] = 1;
            if (pos == n) labels[0] = 0;
            double wins = 0.0;
            std::size_t pairs = 0;
            for (int i = 0; i < n; ++i) {
                if (labels[i] != 1) continue;
                for (int j = 0; j < n; ++j) {
                    if (labels[j] != 0) continue;
                    ++pairs;
                    if (scores[i] > scores[j])
                        wins += 1.0;
                    else if (scores[i] == scores[j])
                        wins += 0.5;
                }
            }
            const double brute = wins / static_cast<double>(pairs);
            if (std::abs(roc_auc(scores, labels) - brute) > 1e-12) {
                ok = false;
                why = "auc disagrees with pair counting";
            }
        }
        // hand oracles
        if (ok) {
            const PRF r = precision_recall_f1({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {{1, 5}}, 20);
            if (std::abs(r.precision - 0.5) > 1e-12 || std::abs(r.recall - 1.0) > 1e-12 ||
                std::abs(r.f1 - 2.0 / 3.0) > 1e-12) {
                ok = false;
                why = "f1 hand oracle";
            }
            if (std::abs(mrr({1, 2, 4}) - (1.0 + 0.5 + 0.25) / 3.0) > 1e-12) {
                ok = false;
                why = "mrr hand oracle";
            }
        }
        // bit-identical fixed-seed evaluation pipeline
        if (ok) {
            auto build = [&]() {
                std::vector<MetricRow> rows;
                for (std::size_t i = 0; i < 5; ++i) {
                    RolloutOptions opts;
                    opts.s_star = 12;
                    opts.keep_states = false;
                    EpisodeTrace t = rollout(held_videos[i], encoder, agent, opts, nullptr,
                                             &held_ps[i]);
                    rows.push_back(evaluate_selection(held_videos[i].id, t.frames,
                                                      held_videos[i].segments,
                                                      held_videos[i].num_frames, 12));
                }
                return report_json(rows).dump();
            };
            if (build() != build()) {
                ok = false;
                why = "fixed-seed pipeline not bit-identical";
            }
        }
        report(7, "metric implementations against independent oracles", ok, why);
    }

    // ------------------------------------------------------------ criterion 8
    {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(505);
        AgentConfig cfg;
        cfg.d = 4;
        cfg.q = 4;
        cfg.nu_max = 3;
        cfg.omega_max = 2;
        Agent bandit(cfg, rng);
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec state(cfg.state_dim());
        for (auto& x : state) x = nd(rng);
        nn::Adam popt(1e-2), vopt(1e-2);
        const int rewarded = 2;
        for (int i = 0; i < 2000; ++i) {
            Vec dist = bandit.policy_forward(state);
            const Action a = select_action(dist, SelectMode::Sample, &rng);
            const double r = static_cast<int>(a) == rewarded ? 1.0 : 0.0;
            policy_value_update(bandit, popt, vopt, {state}, {static_cast<int>(a)}, {r}, 0.01,
                                5.0);
        }
        const double p = bandit.policy_forward(state)[rewarded];
        const double secs = seconds_since(t0);
        const bool ok = p > 0.9 && secs < 30.0;
        report(8, "policy-gradient sanity on a one-step decision", ok,
               "p(rewarded)=" + fmt(p) + ", " + fmt(secs) + "s");
    }

    std::printf("acceptance suite finished in %.1fs, %d failure(s)\n", seconds_since(suite_t0),
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
