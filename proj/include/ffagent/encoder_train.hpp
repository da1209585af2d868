#pragma once

#include <iosfwd>
#include <vector>

#include "ffagent/corpus.hpp"
#include "ffagent/encoder.hpp"

namespace ffagent {

struct EncoderTrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double eta = 0.0;           // cosine loss margin
    double val_fraction = 0.1;  // clip-level split, fixed seed
    double target_val_auc = 0.0;  // > 0: stop once the validation AUC reaches it
    std::size_t pairs_per_clip = 1;  // pos/neg pairs resampled per clip per epoch
    double lr_decay = 1.0;           // multiplicative per-epoch learning-rate decay
    std::uint64_t seed = 5;

    nlohmann::json to_json() const;
    static EncoderTrainConfig from_json(const nlohmann::json& j);
};

struct EncoderEpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auc = 0.0;
};

struct EncoderTrainResult {
    std::vector<EncoderEpochStats> log;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double final_val_auc = 0.0;
};

// Pairwise training on positive/negative documents; keeps the parameters of
// the best validation epoch. Throws NumericError on non-finite loss.
EncoderTrainResult train_encoder(Encoder& encoder, const Corpus& corpus,
                                 const EncoderTrainConfig& cfg,
                                 std::ostream* ndjson_log = nullptr);

// Retrieval scoring: for each clip, alignment of its own captions (positive)
// and a random other clip's captions (negative) against the clip embedding.
double encoder_pair_auc(const Encoder& encoder, const Corpus& corpus,
                        const std::vector<std::size_t>& clip_indices, std::uint64_t seed,
                        double eta, double* mean_loss = nullptr);

}  // namespace ffagent
