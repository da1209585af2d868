// ffagent: synthetic-data generation, encoder/agent training, fast-forward
// inference, and evaluation from one binary.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric abort.
// Progress goes to stderr (level via FFAGENT_LOG: quiet|info|debug);
// machine-readable artifacts go to files, stdout stays clean for piping.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffagent/corpus.hpp"
#include "ffagent/encoder.hpp"
#include "ffagent/encoder_train.hpp"
#include "ffagent/env.hpp"
#include "ffagent/errors.hpp"
#include "ffagent/metrics.hpp"
#include "ffagent/rltrain.hpp"
#include "ffagent/saffa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ffagent;

namespace {

int log_level() {
    static int level = [] {
        const char* env = std::getenv("FFAGENT_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "quiet" || v == "error" || v == "0") return 0;
        if (v == "debug" || v == "2") return 2;
        return 1;
    }();
    return level;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[ffagent] " << msg << "\n";
}

// Everything one run needs, serialized as a single JSON document.
struct RunConfig {
    std::uint64_t seed = 7;
    SynthCorpusConfig corpus;
    SynthVideoConfig videos;
    EncoderConfig encoder;
    EncoderTrainConfig encoder_train;
    AgentConfig agent;
    AgentTrainConfig agent_train;

    json to_json() const {
        return {{"seed", seed},
                {"corpus", corpus.to_json()},
                {"videos", videos.to_json()},
                {"encoder", encoder.to_json()},
                {"encoder_train", encoder_train.to_json()},
                {"agent", agent.to_json()},
                {"agent_train", agent_train.to_json()}};
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        c.seed = j.value("seed", c.seed);
        if (j.contains("corpus")) c.corpus = SynthCorpusConfig::from_json(j.at("corpus"));
        if (j.contains("videos")) c.videos = SynthVideoConfig::from_json(j.at("videos"));
        if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
        if (j.contains("encoder_train"))
            c.encoder_train = EncoderTrainConfig::from_json(j.at("encoder_train"));
        if (j.contains("agent")) c.agent = AgentConfig::from_json(j.at("agent"));
        if (j.contains("agent_train"))
            c.agent_train = AgentTrainConfig::from_json(j.at("agent_train"));
        return c;
    }
};

// Configs reject keys that the defaults do not document.
void reject_unknown_keys(const json& given, const json& defaults, const std::string& path) {
    if (!given.is_object() || !defaults.is_object()) return;
    for (const auto& [key, value] : given.items()) {
        if (!defaults.contains(key))
            throw ConfigError("unknown config key: " + (path.empty() ? key : path + "." + key));
        reject_unknown_keys(value, defaults.at(key), path.empty() ? key : path + "." + key);
    }
}

RunConfig load_run_config(const std::string& path) {
    RunConfig defaults;
    if (path.empty()) return defaults;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid config JSON in " + path + ": " + e.what());
    }
    reject_unknown_keys(j, defaults.to_json(), "");
    json merged = defaults.to_json();
    merged.merge_patch(j);
    return RunConfig::from_json(merged);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

Encoder load_encoder(const std::string& prefix) {
    return Encoder::load(prefix + ".json", prefix + ".bin");
}

Agent load_agent(const std::string& prefix) {
    return Agent::load(prefix + ".json", prefix + ".bin");
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::int64_t seed,
              std::int64_t n_videos) {
    RunConfig cfg = load_run_config(config_path);
    if (seed >= 0) {
        cfg.corpus.seed = static_cast<std::uint64_t>(seed);
        cfg.videos.seed = static_cast<std::uint64_t>(seed) + 1;
        cfg.corpus.library.seed = static_cast<std::uint64_t>(seed) + 2;
    }
    if (n_videos > 0) cfg.videos.n_videos = static_cast<std::size_t>(n_videos);
    // one topic library shared by the corpus and the videos, so documents and
    // clip features live in the same generative family
    cfg.videos.library = cfg.corpus.library;

    fs::create_directories(out_dir);
    const TopicLibrary lib = make_topic_library(cfg.corpus.library);
    const Corpus corpus = generate_corpus(cfg.corpus, lib);
    save_corpus(corpus, (fs::path(out_dir) / "corpus.json").string());
    const std::vector<VideoSpec> videos = generate_videos(cfg.videos, lib);
    save_dataset(videos, out_dir);
    write_text((fs::path(out_dir) / "synth_config.json").string(), cfg.to_json().dump(2) + "\n");

    // round-trip validation on write
    load_corpus((fs::path(out_dir) / "corpus.json").string());
    load_dataset((fs::path(out_dir) / "manifest.json").string());
    info("synth: " + std::to_string(corpus.clips.size()) + " clips, " +
         std::to_string(videos.size()) + " videos -> " + out_dir);
    return 0;
}

int cmd_train_encoder(const std::string& corpus_path, const std::string& config_path,
                      const std::string& out_prefix, std::int64_t seed) {
    RunConfig cfg = load_run_config(config_path);
    if (seed >= 0) cfg.encoder_train.seed = static_cast<std::uint64_t>(seed);
    const Corpus corpus = load_corpus(corpus_path);
    info("train-encoder: " + std::to_string(corpus.clips.size()) + " clips");
    Vocabulary vocab = build_vocabulary(corpus, cfg.encoder.word_dim, cfg.encoder_train.seed);
    std::mt19937_64 rng(cfg.encoder_train.seed);
    Encoder encoder(cfg.encoder, std::move(vocab), rng);

    std::ofstream log_out(out_prefix + ".log");
    if (!log_out) throw DataError("cannot write training log: " + out_prefix + ".log");
    const EncoderTrainResult result = train_encoder(encoder, corpus, cfg.encoder_train, &log_out);
    encoder.save(out_prefix + ".json", out_prefix + ".bin",
                 {{"train_config", cfg.encoder_train.to_json()}});
    info("train-encoder: best epoch " + std::to_string(result.best_epoch) + ", val loss " +
         std::to_string(result.best_val_loss) + ", held-out AUC " +
         std::to_string(result.final_val_auc));
    return 0;
}

int cmd_train_agent(const std::string& dataset_path, const std::string& encoder_prefix,
                    const std::string& config_path, const std::string& out_prefix,
                    std::int64_t seed) {
    RunConfig cfg = load_run_config(config_path);
    if (seed >= 0) cfg.agent_train.seed = static_cast<std::uint64_t>(seed);
    const std::vector<VideoSpec> videos = load_dataset(dataset_path);
    Encoder encoder = load_encoder(encoder_prefix);
    cfg.agent.d = encoder.cfg.embed_dim;
    std::mt19937_64 rng(cfg.agent_train.seed);
    Agent agent(cfg.agent, rng);
    info("train-agent: " + std::to_string(videos.size()) + " videos, " +
         std::to_string(cfg.agent_train.epochs) + " epochs");

    std::ofstream log_out(out_prefix + ".log");
    if (!log_out) throw DataError("cannot write training log: " + out_prefix + ".log");
    const AgentTrainResult result = train_agent(videos, encoder, agent, cfg.agent_train, &log_out);
    agent.save(out_prefix + ".json", out_prefix + ".bin",
               {{"train_config", cfg.agent_train.to_json()}});
    if (!result.log.empty())
        info("train-agent: final mean |OS - S*| = " +
             std::to_string(result.log.back().mean_abs_speed_error));
    return 0;
}

int cmd_fastforward(const std::string& dataset_path, const std::string& encoder_prefix,
                    const std::string& agent_prefix, int s_star, const std::string& out_dir) {
    Encoder encoder = load_encoder(encoder_prefix);
    Agent agent = load_agent(agent_prefix);
    if (s_star < 1 || s_star > agent.cfg.nu_max)
        throw ConfigError("--speedup must be in [1, " + std::to_string(agent.cfg.nu_max) + "]");
    const std::vector<VideoSpec> videos = load_dataset(dataset_path);
    fs::create_directories(out_dir);

    for (const auto& video : videos) {
        const std::vector<nn::Vec> ps = encoder.sentence_embeddings(video.document);
        RolloutOptions opts;
        opts.s_star = s_star;
        opts.mode = SelectMode::Greedy;
        opts.keep_states = false;
        const EpisodeTrace trace = rollout(video, encoder, agent, opts, nullptr, &ps);

        json sel = {{"video_id", video.id},
                    {"s_star", s_star},
                    {"selected_frames", trace.frames},
                    {"os", output_speedup(video.num_frames, trace.length())}};
        write_text((fs::path(out_dir) / (video.id + ".json")).string(), sel.dump(2) + "\n");

        // skip profile: per visited frame, the jump taken and the alignment score
        std::ostringstream csv;
        csv << "frame,nu,alignment\n";
        for (std::size_t t = 0; t < trace.frames.size(); ++t) {
            const std::size_t nu = t + 1 < trace.frames.size()
                                       ? trace.frames[t + 1] - trace.frames[t]
                                       : 0;
            double align;
            if (t + 1 < trace.frames.size()) {
                align = trace.rewards[t];  // non-terminal reward is the alignment
            } else {
                const nn::Vec phi = clip_at(video, trace.frames[t]);
                align = alignment(encoder.encode_document_from_ps(ps, phi),
                                  encoder.encode_clip(phi));
            }
            csv << trace.frames[t] << ',' << nu << ',' << align << "\n";
        }
        write_text((fs::path(out_dir) / (video.id + ".csv")).string(), csv.str());
        info("fastforward: " + video.id + " kept " + std::to_string(trace.length()) + "/" +
             std::to_string(video.num_frames) + " frames (OS " +
             std::to_string(output_speedup(video.num_frames, trace.length())) + ")");
    }
    return 0;
}

std::pair<int, int> parse_sweep_range(const std::string& text) {
    const auto pos = text.find("..");
    if (pos == std::string::npos) throw ConfigError("--sweep expects a range like 2..20");
    try {
        const int lo = std::stoi(text.substr(0, pos));
        const int hi = std::stoi(text.substr(pos + 2));
        if (lo < 1 || hi < lo) throw ConfigError("--sweep range is empty or out of order");
        return {lo, hi};
    } catch (const std::invalid_argument&) {
        throw ConfigError("--sweep expects integers, got: " + text);
    }
}

int cmd_eval(const std::string& selections_dir, const std::string& dataset_path,
             const std::string& out_prefix, const std::string& sweep,
             const std::string& encoder_prefix, const std::string& agent_prefix) {
    const std::vector<VideoSpec> videos = load_dataset(dataset_path);

    if (!sweep.empty()) {
        if (encoder_prefix.empty() || agent_prefix.empty())
            throw ConfigError("--sweep needs --encoder and --agent");
        const auto [lo, hi] = parse_sweep_range(sweep);
        std::vector<int> targets;
        for (int s = lo; s <= hi; ++s) targets.push_back(s);
        Encoder encoder = load_encoder(encoder_prefix);
        Agent agent = load_agent(agent_prefix);
        const std::vector<SweepRow> rows = speedup_sweep(agent, encoder, videos, targets);
        write_text(out_prefix + "_sweep.csv", sweep_csv(rows));
        info("eval: sweep over S* in [" + std::to_string(lo) + ", " + std::to_string(hi) +
             "] -> " + out_prefix + "_sweep.csv");
        return 0;
    }

    if (selections_dir.empty()) throw ConfigError("eval needs --selections or --sweep");
    std::vector<MetricRow> rows;
    for (const auto& video : videos) {
        const std::string sel_path =
            (fs::path(selections_dir) / (video.id + ".json")).string();
        std::ifstream in(sel_path);
        if (!in) throw DataError("missing selection file: " + sel_path);
        json sel;
        try {
            in >> sel;
            if (sel.at("video_id").get<std::string>() != video.id)
                throw DataError("selection/video id mismatch in " + sel_path);
            rows.push_back(evaluate_selection(
                video.id, sel.at("selected_frames").get<std::vector<std::size_t>>(),
                video.segments, video.num_frames, sel.at("s_star").get<int>()));
        } catch (const json::exception& e) {
            throw DataError("invalid selection file " + sel_path + ": " + e.what());
        }
    }
    write_text(out_prefix + ".json", report_json(rows).dump(2) + "\n");
    write_text(out_prefix + ".csv", report_csv(rows));
    const MetricRow agg = aggregate(rows);
    info("eval: " + std::to_string(rows.size()) + " videos, mean F1 " +
         std::to_string(agg.f1) + ", mean OS " + std::to_string(agg.os) + ", mean OP " +
         std::to_string(agg.op));
    return 0;
}

int cmd_eval_op(double f1, double os, double s_star) {
    if (f1 > 1.0) f1 /= 100.0;  // accept the percent convention used in reports
    const double op = overall_performance(f1, os, s_star);
    std::printf("%.2f\n", op * 100.0);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"text-driven video fast-forwarding toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and video dataset");
    std::string synth_config, synth_out;
    std::int64_t synth_seed = -1, synth_videos = -1;
    synth->add_option("--config", synth_config, "run config JSON");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "override generation seeds");
    synth->add_option("--videos", synth_videos, "number of videos");

    // train-encoder
    auto* tenc = app.add_subcommand("train-encoder", "train the cross-modal encoder");
    std::string tenc_corpus, tenc_config, tenc_out;
    std::int64_t tenc_seed = -1;
    tenc->add_option("--corpus", tenc_corpus, "corpus JSON")->required();
    tenc->add_option("--config", tenc_config, "run config JSON");
    tenc->add_option("--out", tenc_out, "checkpoint prefix (writes .json/.bin/.log)")->required();
    tenc->add_option("--seed", tenc_seed, "override training seed");

    // train-agent
    auto* tag = app.add_subcommand("train-agent", "train the frame-skipping agent");
    std::string tag_dataset, tag_encoder, tag_config, tag_out;
    std::int64_t tag_seed = -1;
    tag->add_option("--dataset", tag_dataset, "dataset manifest JSON")->required();
    tag->add_option("--encoder", tag_encoder, "encoder checkpoint prefix")->required();
    tag->add_option("--config", tag_config, "run config JSON");
    tag->add_option("--out", tag_out, "checkpoint prefix (writes .json/.bin/.log)")->required();
    tag->add_option("--seed", tag_seed, "override training seed");

    // fastforward
    auto* ff = app.add_subcommand("fastforward", "greedy frame selection on a dataset");
    std::string ff_dataset, ff_encoder, ff_agent, ff_out;
    int ff_speedup = 12;
    ff->add_option("--dataset", ff_dataset, "dataset manifest JSON")->required();
    ff->add_option("--encoder", ff_encoder, "encoder checkpoint prefix")->required();
    ff->add_option("--agent", ff_agent, "agent checkpoint prefix")->required();
    ff->add_option("--speedup", ff_speedup, "target speed-up S*")->required();
    ff->add_option("--out", ff_out, "output directory for selection files")->required();

    // eval (+ eval op)
    auto* ev = app.add_subcommand("eval", "score selections or run a speed-up sweep");
    std::string ev_selections, ev_dataset, ev_out, ev_sweep, ev_encoder, ev_agent;
    ev->add_option("--selections", ev_selections, "directory of selection JSON files");
    ev->add_option("--dataset", ev_dataset, "dataset manifest JSON");
    ev->add_option("--out", ev_out, "report prefix (writes .json/.csv)");
    ev->add_option("--sweep", ev_sweep, "target range, e.g. 2..20");
    ev->add_option("--encoder", ev_encoder, "encoder checkpoint prefix (sweep)");
    ev->add_option("--agent", ev_agent, "agent checkpoint prefix (sweep)");
    auto* evop = ev->add_subcommand("op", "recompute overall performance from F1/OS");
    double op_f1 = 0.0, op_os = 0.0, op_sstar = 0.0;
    evop->add_option("--f1", op_f1, "F1 (fraction or percent)")->required();
    evop->add_option("--os", op_os, "achieved speed-up")->required();
    evop->add_option("--sstar", op_sstar, "target speed-up")->required();

    // config print-defaults
    auto* cfgcmd = app.add_subcommand("config", "configuration helpers");
    auto* printdef = cfgcmd->add_subcommand("print-defaults", "print the default run config");
    cfgcmd->require_subcommand(1);

    try {
        app.parse(argc, argv);
        if (*synth) return cmd_synth(synth_config, synth_out, synth_seed, synth_videos);
        if (*tenc) return cmd_train_encoder(tenc_corpus, tenc_config, tenc_out, tenc_seed);
        if (*tag) return cmd_train_agent(tag_dataset, tag_encoder, tag_config, tag_out, tag_seed);
        if (*ff) return cmd_fastforward(ff_dataset, ff_encoder, ff_agent, ff_speedup, ff_out);
        if (*evop) return cmd_eval_op(op_f1, op_os, op_sstar);
        if (*ev) return cmd_eval(ev_selections, ev_dataset, ev_out, ev_sweep, ev_encoder, ev_agent);
        if (*printdef) {
            std::cout << RunConfig().to_json().dump(2) << "\n";
            return 0;
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
}
