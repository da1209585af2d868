#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "ffagent/adam.hpp"
#include "ffagent/corpus.hpp"
#include "ffagent/encoder.hpp"
#include "ffagent/encoder_train.hpp"
#include "ffagent/gradcheck.hpp"
#include "ffagent/text.hpp"

using namespace ffagent;
using nn::Vec;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.word_dim = 5;
    cfg.sent_hidden = 4;
    cfg.z = 8;
    cfg.attn_dim = 6;
    cfg.embed_dim = 4;
    cfg.proj_hidden = 6;
    return cfg;
}

Vocabulary tiny_vocab(std::size_t word_dim, std::mt19937_64& rng) {
    Vocabulary vocab(word_dim, rng);
    for (const char* t : {"wash", "the", "tomato", "cut", "onion", "stir", "pan", "salt"})
        vocab.add(t, rng);
    return vocab;
}

Vec random_phi(std::size_t z, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec v(z);
    for (auto& x : v) x = nd(rng);
    return v;
}

Corpus tiny_corpus(std::size_t n_clips, std::size_t z) {
    LibraryConfig lc;
    lc.n_topics = n_clips;
    lc.z = z;
    lc.seed = 42;
    SynthCorpusConfig cc;
    cc.library = lc;
    cc.n_clips = n_clips;
    cc.seed = 43;
    return generate_corpus(cc, make_topic_library(lc));
}

}  // namespace

TEST_CASE("tokenize, chop and document construction") {
    Sentence s = tokenize("  Wash The TOMATO  ");
    CHECK(s == Sentence{"wash", "the", "tomato"});

    std::string long_line;
    for (int i = 0; i < 30; ++i) long_line += "w" + std::to_string(i) + " ";
    Document doc = make_document({long_line, "cut the onion"});
    CHECK(doc.sentences[0].size() == Document::kMaxSentenceTokens);
    CHECK(doc.sentences[0][0] == "w0");
    CHECK(doc.sentences[1].size() == 3);

    CHECK_THROWS_AS(make_document({}), DataError);
    CHECK_THROWS_AS(make_document({"   "}), DataError);
}

TEST_CASE("vocabulary lookup and pretrained loading") {
    std::mt19937_64 rng(1);
    Vocabulary vocab = tiny_vocab(5, rng);
    CHECK(vocab.lookup("tomato") == vocab.index.at("tomato"));
    CHECK(vocab.lookup("zucchini") == vocab.index.at(Vocabulary::kOovToken));

    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "ffagent_vectors.txt";
    {
        std::ofstream out(path);
        out << "cat 0.1 0.2 0.3\ndog -0.1 0.0 0.5\n";
    }
    Vocabulary pre = Vocabulary::load_pretrained(path.string());
    CHECK(pre.frozen);
    CHECK(pre.word_dim() == 3);
    CHECK(pre.embed("cat")[1] == doctest::Approx(0.2));
    CHECK(pre.embed("unknown") == Vec(3, 0.0));  // OOV row appended as zeros
    fs::remove(path);
}

TEST_CASE("sentence encoding") {
    std::mt19937_64 rng(2);
    EncoderConfig cfg = tiny_config();
    Encoder enc(cfg, tiny_vocab(cfg.word_dim, rng), rng);

    SUBCASE("one-word sentence pools to that word's bidirectional state") {
        Sentence s{"tomato"};
        Vec weights;
        Vec p = enc.sentence_forward(s, nullptr, &weights);
        CHECK(weights.size() == 1);
        CHECK(weights[0] == doctest::Approx(1.0));
        const Vec w = enc.vocab.embed("tomato");
        const Vec h0(cfg.sent_hidden, 0.0);
        std::vector<Vec> state =
            nn::bidirectional_encode(enc.sent_fwd, enc.sent_bwd, {w}, h0, h0, nullptr);
        CHECK(p.size() == 2 * cfg.sent_hidden);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(state[0][i]));
    }

    SUBCASE("identical words with stateless recurrence attend uniformly") {
        // Saturate the update gate (z ~ 1) and cut the candidate's recurrent
        // path, so every step's state depends only on its input. Identical
        // words then produce identical states and must share attention mass.
        for (nn::GruCell* c : {&enc.sent_fwd, &enc.sent_bwd}) {
            c->Wz.fill(0.0);
            c->Uz.fill(0.0);
            c->Uh.fill(0.0);
            std::fill(c->bz.begin(), c->bz.end(), 50.0);
        }
        Vec weights;
        enc.sentence_forward({"salt", "salt"}, nullptr, &weights);
        CHECK(weights[0] == doctest::Approx(0.5));
        CHECK(weights[1] == doctest::Approx(0.5));
    }

    SUBCASE("empty sentence is an error") {
        CHECK_THROWS_AS(enc.sentence_forward({}, nullptr), DataError);
    }
}

TEST_CASE("document encoding conditioned on clip features") {
    std::mt19937_64 rng(3);
    EncoderConfig cfg = tiny_config();
    Encoder enc(cfg, tiny_vocab(cfg.word_dim, rng), rng);
    Document doc = make_document({"wash the tomato", "cut the onion"});
    Vec phi = random_phi(cfg.z, rng);

    SUBCASE("single-sentence document pools to its document-level state") {
        Document one = make_document({"stir the pan"});
        Vec weights;
        Vec d = enc.document_forward(one, phi, nullptr, &weights);
        CHECK(weights.size() == 1);
        CHECK(weights[0] == doctest::Approx(1.0));
        Vec p = enc.sentence_forward(one.sentences[0], nullptr);
        Vec state = enc.doc_cell.step(p, phi);
        for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(state[i]));
    }

    SUBCASE("identical attention inputs get identical weights") {
        Vec s = random_phi(cfg.z, rng);
        Vec weights;
        enc.sent_attn.forward({s, s}, &weights);
        CHECK(weights[0] == doctest::Approx(0.5));
        CHECK(weights[1] == doctest::Approx(0.5));
    }

    SUBCASE("changing the clip features changes the document vector") {
        Vec d1 = enc.document_forward(doc, phi, nullptr);
        Vec phi2 = phi;
        for (auto& v : phi2) v += 1.0;
        Vec d2 = enc.document_forward(doc, phi2, nullptr);
        double diff = 0.0;
        for (std::size_t i = 0; i < d1.size(); ++i) diff += std::abs(d1[i] - d2[i]);
        CHECK(diff > 1e-8);
    }

    SUBCASE("clip feature size must match the document hidden size") {
        CHECK_THROWS_AS(enc.document_forward(doc, Vec(cfg.z + 1, 0.0), nullptr), ConfigError);
    }
}

TEST_CASE("projection heads produce unit-norm embeddings") {
    std::mt19937_64 rng(4);
    EncoderConfig cfg = tiny_config();
    Encoder enc(cfg, tiny_vocab(cfg.word_dim, rng), rng);
    enc.set_training(false);
    for (int i = 0; i < 100; ++i) {
        Vec phi = random_phi(cfg.z, rng);
        Vec e = enc.encode_clip(phi);
        CHECK(e.size() == cfg.embed_dim);
        CHECK(nn::norm2(e) == doctest::Approx(1.0).epsilon(1e-9));
    }
    // default embedding dimension
    CHECK(EncoderConfig{}.embed_dim == 128);
    // scaling the input still yields a valid unit vector
    Vec phi = random_phi(cfg.z, rng);
    Vec scaled = phi;
    for (auto& v : scaled) v *= 2.0;
    Vec e = enc.encode_clip(scaled);
    CHECK(nn::norm2(e) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cosine embedding loss") {
    Vec a{1.0, 0.0}, b{0.0, 1.0}, na{-1.0, 0.0};
    CHECK(cosine_embedding_loss(a, a, 1, 0.0) == doctest::Approx(0.0));
    CHECK(cosine_embedding_loss(a, na, -1, 0.0) == doctest::Approx(0.0));  // hinge inactive
    Vec half{std::sqrt(0.75), 0.5};
    Vec e1{0.0, 1.0};
    CHECK(cosine_embedding_loss(half, e1, -1, 0.0) == doctest::Approx(0.5));  // cos = 0.5
    CHECK_THROWS_AS(cosine_embedding_loss(a, b, 0, 0.0), ConfigError);

    // bounds: positive-pair in [0,2], negative-pair in [0, 1-eta]
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        Vec x = nn::l2_normalize(random_phi(4, rng));
        Vec y = nn::l2_normalize(random_phi(4, rng));
        const double lp = cosine_embedding_loss(x, y, 1, 0.0);
        const double ln = cosine_embedding_loss(x, y, -1, 0.1);
        CHECK(lp >= 0.0);
        CHECK(lp <= 2.0 + 1e-12);
        CHECK(ln >= 0.0);
        CHECK(ln <= 0.9 + 1e-12);
    }
}

TEST_CASE("alignment is the dot product") {
    Vec a{1.0, 0.0}, b{0.0, 1.0}, na{-1.0, 0.0};
    CHECK(alignment(a, a) == doctest::Approx(1.0));
    CHECK(alignment(a, b) == doctest::Approx(0.0));
    CHECK(alignment(a, na) == doctest::Approx(-1.0));
}

TEST_CASE("training pair construction") {
    Corpus corpus = tiny_corpus(3, 8);
    std::mt19937_64 rng(6);

    SUBCASE("three-clip corpus forces both other clips into the negative") {
        TrainingPair neg = build_pair(corpus, 0, -1, rng);
        // negative must hold captions of clips 1 and 2 only
        std::vector<std::string> expect;
        for (std::size_t c : {1, 2})
            for (const auto& cap : corpus.clips[c].captions)
                for (const auto& tok : tokenize(cap)) expect.push_back(tok);
        std::vector<std::string> got;
        for (const auto& s : neg.document.sentences)
            for (const auto& tok : s) got.push_back(tok);
        std::sort(expect.begin(), expect.end());
        std::sort(got.begin(), got.end());
        CHECK(expect == got);
    }

    SUBCASE("positive documents contain all of the clip's own captions") {
        for (int rep = 0; rep < 5; ++rep) {
            TrainingPair pos = build_pair(corpus, 1, +1, rng);
            std::vector<Sentence> own;
            for (const auto& cap : corpus.clips[1].captions) own.push_back(tokenize(cap));
            for (const auto& s : own) {
                const bool found = std::find(pos.document.sentences.begin(),
                                             pos.document.sentences.end(),
                                             s) != pos.document.sentences.end();
                CHECK(found);
            }
            // D+ = own captions plus exactly one other clip's captions
            CHECK(pos.document.sentences.size() == 2 * corpus.clips[1].captions.size());
        }
    }

    SUBCASE("fixed seed is reproducible") {
        std::mt19937_64 r1(9), r2(9);
        TrainingPair a = build_pair(corpus, 0, +1, r1);
        TrainingPair b = build_pair(corpus, 0, +1, r2);
        CHECK(a.document.sentences == b.document.sentences);
    }

    SUBCASE("corpus too small") {
        Corpus small;
        small.clips = {corpus.clips[0], corpus.clips[1]};
        CHECK_THROWS_AS(build_pair(small, 0, +1, rng), DataError);
    }
}

TEST_CASE("full encoder loss passes the finite-difference check") {
    std::mt19937_64 rng(7);
    EncoderConfig cfg = tiny_config();
    Encoder enc(cfg, tiny_vocab(cfg.word_dim, rng), rng);
    enc.set_training(true);

    Document doc1 = make_document({"wash the tomato", "cut the onion"});
    Document doc2 = make_document({"stir the pan", "salt the pan"});
    Vec phi1 = random_phi(cfg.z, rng);
    Vec phi2 = random_phi(cfg.z, rng);
    const std::vector<int> labels = {+1, -1};

    auto forward_loss = [&]() {
        Encoder::DocumentCache c1, c2;
        std::vector<Vec> ds = {enc.document_forward(doc1, phi1, &c1),
                               enc.document_forward(doc2, phi2, &c2)};
        ProjectionHead::Cache dc, cc;
        std::vector<Vec> eds = enc.doc_head.forward_batch(ds, dc);
        std::vector<Vec> evs = enc.clip_head.forward_batch({phi1, phi2}, cc);
        double loss = 0.0;
        for (int i = 0; i < 2; ++i)
            loss += cosine_embedding_loss(eds[i], evs[i], labels[i], 0.0);
        return loss;
    };
    auto grad = [&]() {
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
    auto rep = nn::gradient_check(params, forward_loss, grad);
    CHECK_MESSAGE(rep.max_rel_err < 1e-4, "worst param: " << rep.worst_param);
}

TEST_CASE("encoder training loop") {
    Corpus corpus = tiny_corpus(12, 8);
    EncoderConfig ecfg = tiny_config();

    SUBCASE("zero learning rate leaves parameters unchanged") {
        std::mt19937_64 rng(8);
        Encoder enc(ecfg, build_vocabulary(corpus, ecfg.word_dim, 8), rng);
        std::vector<double> before;
        for (const auto& p : enc.trainable_params())
            before.insert(before.end(), p.value, p.value + p.size());
        EncoderTrainConfig tc;
        tc.epochs = 1;
        tc.lr = 0.0;
        tc.batch_size = 8;
        train_encoder(enc, corpus, tc, nullptr);
        std::vector<double> after;
        for (const auto& p : enc.trainable_params())
            after.insert(after.end(), p.value, p.value + p.size());
        CHECK(before == after);
    }

    SUBCASE("loss on a fixed batch decreases over the first steps") {
        std::mt19937_64 rng(9);
        Encoder enc(ecfg, build_vocabulary(corpus, ecfg.word_dim, 9), rng);
        enc.set_training(true);
        std::mt19937_64 pair_rng(10);
        std::vector<TrainingPair> batch;
        for (std::size_t i = 0; i < 8; ++i)
            batch.push_back(build_pair(corpus, i, i % 2 == 0 ? +1 : -1, pair_rng));

        auto run_batch = [&](bool update, nn::Adam* opt) {
            std::vector<Encoder::DocumentCache> caches(batch.size());
            std::vector<Vec> ds, phis;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const Clip& clip = corpus.clips[batch[i].clip_index];
                ds.push_back(enc.document_forward(batch[i].document, clip.features, &caches[i]));
                phis.push_back(clip.features);
            }
            ProjectionHead::Cache dc, cc;
            std::vector<Vec> eds = enc.doc_head.forward_batch(ds, dc);
            std::vector<Vec> evs = enc.clip_head.forward_batch(phis, cc);
            double loss = 0.0;
            std::vector<Vec> dd(batch.size()), dv(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                loss += cosine_embedding_loss(eds[i], evs[i], batch[i].label, 0.0);
                cosine_embedding_loss_grad(eds[i], evs[i], batch[i].label, 0.0, dd[i], dv[i]);
            }
            if (update) {
                enc.zero_grad();
                std::vector<Vec> dds = enc.doc_head.backward_batch(dc, dd);
                enc.clip_head.backward_batch(cc, dv);
                for (std::size_t i = 0; i < batch.size(); ++i)
                    enc.document_backward(caches[i], dds[i]);
                auto params = enc.trainable_params();
                opt->step(params);
            }
            return loss / static_cast<double>(batch.size());
        };

        nn::Adam opt(1e-2);
        const double before = run_batch(false, nullptr);
        for (int step = 0; step < 10; ++step) run_batch(true, &opt);
        const double after = run_batch(false, nullptr);
        CHECK(after < before);
        CHECK(std::isfinite(after));
    }
}

TEST_CASE("encoder checkpoint round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ffagent_enc_ckpt";
    fs::create_directories(dir);
    std::mt19937_64 rng(11);
    EncoderConfig cfg = tiny_config();
    Encoder enc(cfg, tiny_vocab(cfg.word_dim, rng), rng);
    enc.set_training(false);

    Document doc = make_document({"wash the tomato"});
    Vec phi = random_phi(cfg.z, rng);

    const std::string m1 = (dir / "enc.json").string(), b1 = (dir / "enc.bin").string();
    enc.save(m1, b1);
    Encoder loaded = Encoder::load(m1, b1);
    // reload changes nothing beyond one float32 cast
    Vec e1 = enc.encode_document(doc, phi);
    Vec e2 = loaded.encode_document(doc, phi);
    for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == doctest::Approx(e2[i]).epsilon(1e-5));

    // saving the loaded model again is bit-identical
    const std::string m2 = (dir / "enc2.json").string(), b2 = (dir / "enc2.bin").string();
    loaded.save(m2, b2);
    std::ifstream f1(b1, std::ios::binary), f2(b2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    fs::remove_all(dir);
}

TEST_CASE("corpus file round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ffagent_corpus";
    fs::create_directories(dir);
    Corpus corpus = tiny_corpus(5, 8);
    const std::string path = (dir / "corpus.json").string();
    save_corpus(corpus, path);
    Corpus loaded = load_corpus(path);
    REQUIRE(loaded.clips.size() == corpus.clips.size());
    for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
        CHECK(loaded.clips[i].id == corpus.clips[i].id);
        CHECK(loaded.clips[i].captions == corpus.clips[i].captions);
        for (std::size_t j = 0; j < corpus.clips[i].features.size(); ++j)
            CHECK(loaded.clips[i].features[j] == doctest::Approx(corpus.clips[i].features[j]));
    }
    CHECK_THROWS_AS(load_corpus((dir / "missing.json").string()), DataError);
    fs::remove_all(dir);
}
