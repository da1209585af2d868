#include "ffagent/encoder_train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ffagent/adam.hpp"
#include "ffagent/errors.hpp"
#include "ffagent/metrics.hpp"

namespace ffagent {

using nn::Vec;

nlohmann::json EncoderTrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"lr", lr},
            {"eta", eta},
            {"val_fraction", val_fraction},
            {"target_val_auc", target_val_auc},
            {"pairs_per_clip", pairs_per_clip},
            {"lr_decay", lr_decay},
            {"seed", seed}};
}

EncoderTrainConfig EncoderTrainConfig::from_json(const nlohmann::json& j) {
    EncoderTrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.eta = j.value("eta", c.eta);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.target_val_auc = j.value("target_val_auc", c.target_val_auc);
    c.pairs_per_clip = j.value("pairs_per_clip", c.pairs_per_clip);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.seed = j.value("seed", c.seed);
    if (c.pairs_per_clip < 1) throw ConfigError("encoder train config: pairs_per_clip < 1");
    if (c.lr_decay <= 0.0 || c.lr_decay > 1.0)
        throw ConfigError("encoder train config: lr_decay out of (0, 1]");
    return c;
}

namespace {

// Forward + backward for one batch of pairs; returns mean loss.
double batch_step(Encoder& enc, const Corpus& corpus, const std::vector<TrainingPair>& batch,
                  double eta) {
    const std::size_t B = batch.size();
    std::vector<Encoder::DocumentCache> dcaches(B);
    std::vector<Vec> ds(B), phis(B);
    for (std::size_t i = 0; i < B; ++i) {
        const Clip& clip = corpus.clips[batch[i].clip_index];
        if (clip.features.size() != enc.cfg.z)
            throw DataError("corpus clip " + clip.id + ": feature size " +
                            std::to_string(clip.features.size()) + " != z " +
                            std::to_string(enc.cfg.z));
        ds[i] = enc.document_forward(batch[i].document, clip.features, &dcaches[i]);
        phis[i] = clip.features;
    }
    ProjectionHead::Cache doc_cache, clip_cache;
    std::vector<Vec> e_docs = enc.doc_head.forward_batch(ds, doc_cache);
    std::vector<Vec> e_clips = enc.clip_head.forward_batch(phis, clip_cache);

    double loss = 0.0;
    std::vector<Vec> d_docs(B), d_clips(B);
    for (std::size_t i = 0; i < B; ++i) {
        loss += cosine_embedding_loss(e_docs[i], e_clips[i], batch[i].label, eta);
        cosine_embedding_loss_grad(e_docs[i], e_clips[i], batch[i].label, eta, d_docs[i],
                                   d_clips[i]);
        // mean over the batch
        for (auto& g : d_docs[i]) g /= static_cast<double>(B);
        for (auto& g : d_clips[i]) g /= static_cast<double>(B);
    }
    loss /= static_cast<double>(B);
    if (!std::isfinite(loss)) throw NumericError("train_encoder: non-finite loss");

    std::vector<Vec> dd = enc.doc_head.backward_batch(doc_cache, d_docs);
    enc.clip_head.backward_batch(clip_cache, d_clips);
    for (std::size_t i = 0; i < B; ++i) enc.document_backward(dcaches[i], dd[i]);
    return loss;
}

std::vector<TrainingPair> make_pairs(const Corpus& corpus,
                                     const std::vector<std::size_t>& clip_indices,
                                     std::size_t pairs_per_clip, std::mt19937_64& rng) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(clip_indices.size() * 2 * pairs_per_clip);
    for (std::size_t idx : clip_indices) {
        for (std::size_t k = 0; k < pairs_per_clip; ++k) {
            pairs.push_back(build_pair(corpus, idx, +1, rng));
            pairs.push_back(build_pair(corpus, idx, -1, rng));
        }
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    return pairs;
}

}  // namespace

// Retrieval-style scoring: the positive document is the clip's own captions,
// the negative a uniformly drawn other clip's captions. (Training pairs mix
// in distractor captions as augmentation; scoring uses the clean question
// "does this document describe this clip?".)
double encoder_pair_auc(const Encoder& encoder, const Corpus& corpus,
                        const std::vector<std::size_t>& clip_indices, std::uint64_t seed,
                        double eta, double* mean_loss) {
    if (corpus.clips.size() < 2) throw DataError("encoder_pair_auc: corpus too small");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.clips.size() - 1);
    std::vector<double> scores;
    std::vector<int> labels;
    double loss = 0.0;
    std::size_t n = 0;
    for (std::size_t idx : clip_indices) {
        const Clip& clip = corpus.clips[idx];
        const Vec e_v = encoder.encode_clip(clip.features);
        std::size_t other;
        do {
            other = pick(rng);
        } while (other == idx);
        for (int label : {+1, -1}) {
            const Document doc =
                make_document(label == 1 ? clip.captions : corpus.clips[other].captions);
            const Vec e_d = encoder.encode_document(doc, clip.features);
            scores.push_back(alignment(e_d, e_v));
            labels.push_back(label == 1 ? 1 : 0);
            loss += cosine_embedding_loss(e_d, e_v, label, eta);
            ++n;
        }
    }
    if (mean_loss) *mean_loss = loss / static_cast<double>(n);
    return roc_auc(scores, labels);
}

EncoderTrainResult train_encoder(Encoder& encoder, const Corpus& corpus,
                                 const EncoderTrainConfig& cfg, std::ostream* ndjson_log) {
    if (corpus.clips.size() < 3) throw DataError("train_encoder: corpus too small");
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> indices(corpus.clips.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    std::shuffle(indices.begin(), indices.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(indices.size())));
    std::vector<std::size_t> val_clips(indices.begin(), indices.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_clips(indices.begin() + static_cast<long>(n_val),
                                         indices.end());
    if (train_clips.size() < 3) throw DataError("train_encoder: train split too small");

    nn::Adam opt(cfg.lr);
    std::vector<nn::ParamRef> params = encoder.trainable_params();

    EncoderTrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<Vec> best_snapshot;
    auto snapshot_tensors = encoder.checkpoint_tensors();
    auto take_snapshot = [&]() {
        best_snapshot.clear();
        for (const auto& t : snapshot_tensors)
            best_snapshot.emplace_back(t.value, t.value + t.size());
    };

    encoder.set_training(true);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<TrainingPair> pairs = make_pairs(corpus, train_clips, cfg.pairs_per_clip, rng);
        double train_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, pairs.size());
            std::vector<TrainingPair> batch(pairs.begin() + static_cast<long>(start),
                                            pairs.begin() + static_cast<long>(end));
            encoder.zero_grad();
            train_loss += batch_step(encoder, corpus, batch, cfg.eta);
            opt.step(params);
            ++n_batches;
        }
        train_loss /= static_cast<double>(n_batches);

        double val_loss = 0.0;
        const double val_auc =
            encoder_pair_auc(encoder, corpus, val_clips, cfg.seed + 1000, cfg.eta, &val_loss);
        EncoderEpochStats stats{epoch, train_loss, val_loss, val_auc};
        result.log.push_back(stats);
        if (ndjson_log) {
            nlohmann::json rec = {{"epoch", epoch},
                                  {"train_loss", train_loss},
                                  {"val_loss", val_loss},
                                  {"val_auc", val_auc}};
            (*ndjson_log) << rec.dump() << "\n";
        }
        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            take_snapshot();
        }
        if (cfg.target_val_auc > 0.0 && val_auc >= cfg.target_val_auc) break;
        opt.lr *= cfg.lr_decay;
    }
    if (!best_snapshot.empty()) {
        for (std::size_t k = 0; k < snapshot_tensors.size(); ++k)
            std::copy(best_snapshot[k].begin(), best_snapshot[k].end(),
                      snapshot_tensors[k].value);
    }
    encoder.set_training(false);
    double final_val_loss = 0.0;
    result.final_val_auc =
        encoder_pair_auc(encoder, corpus, val_clips, cfg.seed + 1000, cfg.eta, &final_val_loss);
    return result;
}

}  // namespace ffagent
