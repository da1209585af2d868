#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffagent/layers.hpp"
#include "ffagent/text.hpp"

namespace ffagent {

struct EncoderConfig {
    std::size_t word_dim = 50;
    std::size_t sent_hidden = 32;  // per direction; sentence states are 2x this
    std::size_t z = 64;            // clip feature dim == document-level hidden size
    std::size_t attn_dim = 64;
    std::size_t embed_dim = 128;
    std::size_t proj_hidden = 64;

    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

// Dense -> ReLU -> Dense -> BatchNorm -> L2. Maps into the joint space.
struct ProjectionHead {
    nn::Dense fc1, fc2;
    nn::BatchNorm bn;

    ProjectionHead() = default;
    ProjectionHead(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng);

    struct Cache {
        std::vector<nn::Dense::Cache> c1, c2;
        nn::BatchNorm::Cache bn;
        std::vector<nn::Vec> bn_out;  // input to the L2 step
    };

    std::vector<nn::Vec> forward_batch(const std::vector<nn::Vec>& xs, Cache& cache);
    std::vector<nn::Vec> backward_batch(Cache& cache, const std::vector<nn::Vec>& dout);
    nn::Vec forward_frozen(const nn::Vec& x) const;

    void zero_grad();
    void collect(std::vector<nn::ParamRef>& out, const std::string& prefix);
    void collect_stats(std::vector<nn::ParamRef>& out, const std::string& prefix);
};

// Hierarchical attention document encoder conditioned on clip features,
// plus the clip projection head mapping both into a joint space.
struct Encoder {
    EncoderConfig cfg;
    Vocabulary vocab;
    nn::GruCell sent_fwd, sent_bwd;
    nn::AttentionPool word_attn;
    nn::GruCell doc_cell;  // hidden size z; h0 = phi(v)
    nn::AttentionPool sent_attn;
    ProjectionHead doc_head, clip_head;

    Encoder() = default;
    Encoder(EncoderConfig config, Vocabulary vocabulary, std::mt19937_64& rng);

    struct SentenceCache {
        std::vector<std::size_t> word_rows;
        nn::BiGruTape tape;
        nn::AttentionPool::Cache attn;
        std::vector<nn::Vec> states;
    };

    struct DocumentCache {
        std::vector<SentenceCache> sents;
        std::vector<nn::Vec> ps;
        nn::GruTape doc_tape;
        nn::AttentionPool::Cache attn;
        nn::Vec phi;
    };

    // Sentence-level: bidirectional states + word attention -> p_i.
    nn::Vec sentence_forward(const Sentence& sentence, SentenceCache* cache,
                             nn::Vec* word_weights = nullptr) const;
    void sentence_backward(SentenceCache& cache, const nn::Vec& dp);

    // Document-level recurrence seeded with h0 = phi(v), sentence attention -> d.
    nn::Vec document_forward(const Document& doc, const nn::Vec& phi, DocumentCache* cache,
                             nn::Vec* sentence_weights = nullptr) const;
    void document_backward(DocumentCache& cache, const nn::Vec& dd);

    // Inference (frozen batch-norm statistics): unit-norm embeddings.
    nn::Vec encode_document(const Document& doc, const nn::Vec& phi,
                            nn::Vec* sentence_weights = nullptr) const;
    nn::Vec encode_clip(const nn::Vec& phi) const;

    // Sentence embeddings p_i do not depend on phi; rollouts precompute them
    // once per document and re-run only the document level per step.
    std::vector<nn::Vec> sentence_embeddings(const Document& doc) const;
    nn::Vec encode_document_from_ps(const std::vector<nn::Vec>& ps, const nn::Vec& phi,
                                    nn::Vec* sentence_weights = nullptr) const;

    void set_training(bool on);
    void zero_grad();
    std::vector<nn::ParamRef> trainable_params();
    std::vector<nn::ParamRef> checkpoint_tensors();  // trainable + batch-norm stats

    void save(const std::string& manifest_path, const std::string& blob_path,
              const nlohmann::json& extra_header = nlohmann::json::object());
    static Encoder load(const std::string& manifest_path, const std::string& blob_path);
};

// Cosine embedding loss on unit-norm inputs: y=+1 -> 1 - cos,
// y=-1 -> max(0, cos - eta).
double cosine_embedding_loss(const nn::Vec& e_doc, const nn::Vec& e_clip, int y, double eta);

// d(loss)/d(e_doc), d(loss)/d(e_clip).
void cosine_embedding_loss_grad(const nn::Vec& e_doc, const nn::Vec& e_clip, int y, double eta,
                                nn::Vec& d_doc, nn::Vec& d_clip);

inline double alignment(const nn::Vec& e_doc, const nn::Vec& e_clip) {
    return nn::dot(e_doc, e_clip);
}

}  // namespace ffagent
