#include "ffagent/encoder.hpp"

#include "ffagent/checkpoint.hpp"
#include "ffagent/errors.hpp"

namespace ffagent {

using nn::Matrix;
using nn::ParamRef;
using nn::Vec;

nlohmann::json EncoderConfig::to_json() const {
    return {{"word_dim", word_dim},   {"sent_hidden", sent_hidden}, {"z", z},
            {"attn_dim", attn_dim},   {"embed_dim", embed_dim},     {"proj_hidden", proj_hidden}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.word_dim = j.at("word_dim").get<std::size_t>();
    c.sent_hidden = j.at("sent_hidden").get<std::size_t>();
    c.z = j.at("z").get<std::size_t>();
    c.attn_dim = j.at("attn_dim").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.proj_hidden = j.at("proj_hidden").get<std::size_t>();
    return c;
}

// ---------------------------------------------------------------- ProjectionHead

ProjectionHead::ProjectionHead(std::size_t in, std::size_t hidden, std::size_t out,
                               std::mt19937_64& rng)
    : fc1(hidden, in, nn::Activation::Relu, rng),
      fc2(out, hidden, nn::Activation::Linear, rng),
      bn(out) {}

std::vector<Vec> ProjectionHead::forward_batch(const std::vector<Vec>& xs, Cache& cache) {
    const std::size_t B = xs.size();
    cache.c1.resize(B);
    cache.c2.resize(B);
    Matrix pre(B, fc2.out_size());
    for (std::size_t i = 0; i < B; ++i) {
        Vec h = fc1.forward(xs[i], cache.c1[i]);
        Vec o = fc2.forward(h, cache.c2[i]);
        std::copy(o.begin(), o.end(), pre.row(i));
    }
    Matrix normed = bn.forward(pre, cache.bn);
    cache.bn_out.resize(B);
    std::vector<Vec> out(B);
    for (std::size_t i = 0; i < B; ++i) {
        cache.bn_out[i].assign(normed.row(i), normed.row(i) + normed.cols);
        out[i] = nn::l2_normalize(cache.bn_out[i]);
    }
    return out;
}

std::vector<Vec> ProjectionHead::backward_batch(Cache& cache, const std::vector<Vec>& dout) {
    const std::size_t B = dout.size();
    Matrix dY(B, fc2.out_size());
    for (std::size_t i = 0; i < B; ++i) {
        Vec d = nn::l2_normalize_backward(cache.bn_out[i], dout[i]);
        std::copy(d.begin(), d.end(), dY.row(i));
    }
    Matrix dX = bn.training ? bn.backward(cache.bn, dY) : dY;
    if (!bn.training) {
        // frozen stats: elementwise affine
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < bn.dim; ++j) {
                const double istd = 1.0 / std::sqrt(bn.run_var[j] + bn.eps);
                dX.at(i, j) = dY.at(i, j) * bn.gamma[j] * istd;
            }
    }
    std::vector<Vec> dxs(B);
    for (std::size_t i = 0; i < B; ++i) {
        Vec d(dX.row(i), dX.row(i) + dX.cols);
        Vec dh = fc2.backward(cache.c2[i], d);
        dxs[i] = fc1.backward(cache.c1[i], dh);
    }
    return dxs;
}

Vec ProjectionHead::forward_frozen(const Vec& x) const {
    Vec h = fc1.forward(x);
    Vec o = fc2.forward(h);
    return nn::l2_normalize(bn.forward_frozen(o));
}

void ProjectionHead::zero_grad() {
    fc1.zero_grad();
    fc2.zero_grad();
    bn.zero_grad();
}

void ProjectionHead::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
    bn.collect(out, prefix + ".bn");
}

void ProjectionHead::collect_stats(std::vector<ParamRef>& out, const std::string& prefix) {
    bn.collect_stats(out, prefix + ".bn");
}

// ---------------------------------------------------------------- Encoder

Encoder::Encoder(EncoderConfig config, Vocabulary vocabulary, std::mt19937_64& rng)
    : cfg(config),
      vocab(std::move(vocabulary)),
      sent_fwd(config.sent_hidden, config.word_dim, rng),
      sent_bwd(config.sent_hidden, config.word_dim, rng),
      word_attn(config.attn_dim, 2 * config.sent_hidden, rng),
      doc_cell(config.z, 2 * config.sent_hidden, rng),
      sent_attn(config.attn_dim, config.z, rng),
      doc_head(config.z, config.proj_hidden, config.embed_dim, rng),
      clip_head(config.z, config.proj_hidden, config.embed_dim, rng) {
    if (vocab.word_dim() != cfg.word_dim)
        throw ConfigError("encoder: vocabulary word_dim " + std::to_string(vocab.word_dim()) +
                          " does not match config word_dim " + std::to_string(cfg.word_dim));
}

Vec Encoder::sentence_forward(const Sentence& sentence, SentenceCache* cache,
                              Vec* word_weights) const {
    if (sentence.empty()) throw DataError("encode_sentence: empty sentence");
    std::vector<std::size_t> rows;
    std::vector<Vec> words;
    rows.reserve(sentence.size());
    for (const auto& tok : sentence) {
        const std::size_t r = vocab.lookup(tok);
        rows.push_back(r);
        words.emplace_back(vocab.table.row(r), vocab.table.row(r) + vocab.table.cols);
    }
    const Vec h0(cfg.sent_hidden, 0.0);
    nn::BiGruTape tape;
    std::vector<Vec> states =
        nn::bidirectional_encode(sent_fwd, sent_bwd, words, h0, h0, cache ? &tape : nullptr);
    nn::AttentionPool::Cache attn_cache;
    Vec pooled = word_attn.forward(states, attn_cache);
    if (word_weights) *word_weights = attn_cache.alpha;
    if (cache) {
        cache->word_rows = std::move(rows);
        cache->tape = std::move(tape);
        cache->attn = std::move(attn_cache);
        cache->states = std::move(states);
    }
    return pooled;
}

void Encoder::sentence_backward(SentenceCache& cache, const Vec& dp) {
    std::vector<Vec> dstates = word_attn.backward(cache.attn, dp);
    std::vector<Vec> dwords = nn::bidirectional_backward(sent_fwd, sent_bwd, cache.tape, dstates);
    if (!vocab.frozen) {
        for (std::size_t t = 0; t < dwords.size(); ++t) {
            double* g = vocab.gtable.row(cache.word_rows[t]);
            for (std::size_t j = 0; j < vocab.table.cols; ++j) g[j] += dwords[t][j];
        }
    }
}

Vec Encoder::document_forward(const Document& doc, const Vec& phi, DocumentCache* cache,
                              Vec* sentence_weights) const {
    doc.validate();
    if (phi.size() != cfg.z)
        throw ConfigError("encode_document: clip feature size " + std::to_string(phi.size()) +
                          " does not match document hidden size " + std::to_string(cfg.z));
    std::vector<Vec> ps;
    std::vector<SentenceCache> scaches(cache ? doc.sentences.size() : 0);
    ps.reserve(doc.sentences.size());
    for (std::size_t i = 0; i < doc.sentences.size(); ++i)
        ps.push_back(sentence_forward(doc.sentences[i], cache ? &scaches[i] : nullptr));
    nn::GruTape tape;
    std::vector<Vec> states = nn::gru_forward(doc_cell, ps, phi, cache ? &tape : nullptr);
    nn::AttentionPool::Cache attn_cache;
    Vec d = sent_attn.forward(states, attn_cache);
    if (sentence_weights) *sentence_weights = attn_cache.alpha;
    if (cache) {
        cache->sents = std::move(scaches);
        cache->ps = std::move(ps);
        cache->doc_tape = std::move(tape);
        cache->attn = std::move(attn_cache);
        cache->phi = phi;
    }
    return d;
}

void Encoder::document_backward(DocumentCache& cache, const Vec& dd) {
    std::vector<Vec> dstates = sent_attn.backward(cache.attn, dd);
    std::vector<Vec> dps;
    nn::gru_backward(doc_cell, cache.doc_tape, dstates, &dps);
    for (std::size_t i = 0; i < cache.sents.size(); ++i) sentence_backward(cache.sents[i], dps[i]);
}

Vec Encoder::encode_document(const Document& doc, const Vec& phi, Vec* sentence_weights) const {
    Vec d = document_forward(doc, phi, nullptr, sentence_weights);
    return doc_head.forward_frozen(d);
}

std::vector<Vec> Encoder::sentence_embeddings(const Document& doc) const {
    doc.validate();
    std::vector<Vec> ps;
    ps.reserve(doc.sentences.size());
    for (const auto& s : doc.sentences) ps.push_back(sentence_forward(s, nullptr));
    return ps;
}

Vec Encoder::encode_document_from_ps(const std::vector<Vec>& ps, const Vec& phi,
                                     Vec* sentence_weights) const {
    if (phi.size() != cfg.z) throw ConfigError("encode_document_from_ps: feature size mismatch");
    std::vector<Vec> states = nn::gru_forward(doc_cell, ps, phi, nullptr);
    Vec d = sent_attn.forward(states, sentence_weights);
    return doc_head.forward_frozen(d);
}

Vec Encoder::encode_clip(const Vec& phi) const {
    if (phi.size() != cfg.z)
        throw ConfigError("encode_clip: feature size mismatch");
    return clip_head.forward_frozen(phi);
}

void Encoder::set_training(bool on) {
    doc_head.bn.training = on;
    clip_head.bn.training = on;
}

void Encoder::zero_grad() {
    vocab.zero_grad();
    sent_fwd.zero_grad();
    sent_bwd.zero_grad();
    word_attn.zero_grad();
    doc_cell.zero_grad();
    sent_attn.zero_grad();
    doc_head.zero_grad();
    clip_head.zero_grad();
}

std::vector<ParamRef> Encoder::trainable_params() {
    std::vector<ParamRef> out;
    if (!vocab.frozen) out.push_back(nn::param_ref("vocab.table", vocab.table, vocab.gtable));
    sent_fwd.collect(out, "sent_fwd");
    sent_bwd.collect(out, "sent_bwd");
    word_attn.collect(out, "word_attn");
    doc_cell.collect(out, "doc_cell");
    sent_attn.collect(out, "sent_attn");
    doc_head.collect(out, "doc_head");
    clip_head.collect(out, "clip_head");
    return out;
}

std::vector<ParamRef> Encoder::checkpoint_tensors() {
    std::vector<ParamRef> out;
    out.push_back(nn::param_ref("vocab.table", vocab.table, vocab.gtable));
    sent_fwd.collect(out, "sent_fwd");
    sent_bwd.collect(out, "sent_bwd");
    word_attn.collect(out, "word_attn");
    doc_cell.collect(out, "doc_cell");
    sent_attn.collect(out, "sent_attn");
    doc_head.collect(out, "doc_head");
    clip_head.collect(out, "clip_head");
    doc_head.collect_stats(out, "doc_head");
    clip_head.collect_stats(out, "clip_head");
    return out;
}

void Encoder::save(const std::string& manifest_path, const std::string& blob_path,
                   const nlohmann::json& extra_header) {
    nlohmann::json header = extra_header;
    header["kind"] = "encoder";
    header["config"] = cfg.to_json();
    header["vocab_tokens"] = vocab.tokens;
    header["vocab_frozen"] = vocab.frozen;
    nn::save_checkpoint(manifest_path, blob_path, checkpoint_tensors(), header);
}

Encoder Encoder::load(const std::string& manifest_path, const std::string& blob_path) {
    std::map<std::string, Matrix> tensors;
    nlohmann::json header = nn::load_checkpoint_tensors(manifest_path, blob_path, tensors);
    if (header.value("kind", "") != "encoder")
        throw DataError("checkpoint is not an encoder checkpoint: " + manifest_path);
    EncoderConfig cfg = EncoderConfig::from_json(header.at("config"));
    std::mt19937_64 rng(0);
    Vocabulary vocab(cfg.word_dim, rng);
    vocab.index.clear();
    vocab.tokens.clear();
    vocab.table = Matrix(0, cfg.word_dim);
    for (const auto& tok : header.at("vocab_tokens")) {
        const std::string t = tok.get<std::string>();
        vocab.index[t] = vocab.tokens.size();
        vocab.tokens.push_back(t);
    }
    vocab.frozen = header.value("vocab_frozen", false);
    Encoder enc(cfg, std::move(vocab), rng);
    // Reuse the checkpoint layout, then overwrite values tensor by tensor.
    enc.vocab.table = Matrix(enc.vocab.tokens.size(), cfg.word_dim);
    enc.vocab.gtable = Matrix(enc.vocab.tokens.size(), cfg.word_dim);
    std::vector<ParamRef> refs = enc.checkpoint_tensors();
    for (const auto& r : refs) {
        auto it = tensors.find(r.name);
        if (it == tensors.end()) throw DataError("checkpoint missing tensor: " + r.name);
        if (it->second.rows != r.rows || it->second.cols != r.cols)
            throw DataError("checkpoint tensor shape mismatch: " + r.name);
        std::copy(it->second.data.begin(), it->second.data.end(), r.value);
    }
    enc.set_training(false);
    return enc;
}

// ---------------------------------------------------------------- loss

double cosine_embedding_loss(const Vec& e_doc, const Vec& e_clip, int y, double eta) {
    if (y != 1 && y != -1) throw ConfigError("cosine_embedding_loss: y must be +1 or -1");
    if (eta < 0.0 || eta >= 1.0) throw ConfigError("cosine_embedding_loss: eta must be in [0,1)");
    const double c = nn::dot(e_doc, e_clip);
    return y == 1 ? 1.0 - c : std::max(0.0, c - eta);
}

void cosine_embedding_loss_grad(const Vec& e_doc, const Vec& e_clip, int y, double eta,
                                Vec& d_doc, Vec& d_clip) {
    if (y != 1 && y != -1) throw ConfigError("cosine_embedding_loss: y must be +1 or -1");
    d_doc.assign(e_doc.size(), 0.0);
    d_clip.assign(e_clip.size(), 0.0);
    const double c = nn::dot(e_doc, e_clip);
    if (y == 1) {
        for (std::size_t i = 0; i < e_doc.size(); ++i) {
            d_doc[i] = -e_clip[i];
            d_clip[i] = -e_doc[i];
        }
    } else if (c > eta) {
        for (std::size_t i = 0; i < e_doc.size(); ++i) {
            d_doc[i] = e_clip[i];
            d_clip[i] = e_doc[i];
        }
    }
}

}  // namespace ffagent
