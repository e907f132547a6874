#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hierlog/gradcheck.hpp"
#include "hierlog/model.hpp"
#include "oracles.hpp"

using namespace hierlog;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.max_events = 4;
    c.max_chars = 6;
    c.embed_dim = 3;
    c.event_widths = {2, 2};
    c.event_kernels = {3, 1};
    c.seq_widths = {2};
    c.seq_kernels = {3};
    c.dense_widths = {3, 1};
    return c;
}

using oracles::forward_oracle;

SequenceRecord make_record(std::vector<std::string> events, int label = 0) {
    return {"synth", "r0", std::move(events), label};
}

}  // namespace

TEST_CASE("char codec alphabet") {
    CHECK(CharCodec::encode(' ') == 1);
    CHECK(CharCodec::encode('~') == 95);
    CHECK(CharCodec::encode('a') == 'a' - 31);
    CHECK(CharCodec::encode(0xFF) == CharCodec::kUnknown);
    CHECK(CharCodec::encode('\t') == CharCodec::kUnknown);
    CHECK(CharCodec::kVocabularySize == 97);
}

TEST_CASE("encode_sequence pads, truncates, and reports true lengths") {
    ModelConfig cfg = tiny_config();
    cfg.max_events = 2;
    cfg.max_chars = 3;
    auto enc = encode_sequence(make_record({"ab"}), cfg);
    CHECK(enc.codes == std::vector<uint16_t>{CharCodec::encode('a'), CharCodec::encode('b'), 0,
                                             0, 0, 0});
    CHECK(enc.event_count == 1);
    CHECK(enc.char_counts == std::vector<uint16_t>{2});

    auto odd = encode_sequence(make_record({std::string(1, '\xFF')}), cfg);
    CHECK(odd.codes[0] == CharCodec::kUnknown);

    // over-long sequences keep the head
    std::vector<std::string> many;
    for (int i = 0; i < 350; ++i) many.push_back("e" + std::to_string(i));
    ModelConfig big = tiny_config();
    big.max_events = 300;
    auto long_enc = encode_sequence(make_record(std::move(many)), big);
    CHECK(long_enc.event_count == 300);
    CHECK(long_enc.codes[0] == CharCodec::encode('e'));

    CHECK_THROWS_AS(encode_sequence(SequenceRecord{"d", "s", {}, 0}, cfg), DataError);
}

TEST_CASE("forward output is strictly in (0,1)") {
    Model model(tiny_config(), 99);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> events;
        const size_t n = 1 + rng.index(6);
        for (size_t e = 0; e < n; ++e) {
            std::string s;
            for (size_t i = 0; i < 1 + rng.index(8); ++i)
                s.push_back(static_cast<char>(32 + rng.index(95)));
            events.push_back(s);
        }
        Tape tape;
        const double p = model.forward(tape, encode_sequence(make_record(events), tiny_config()))
                             ->data[0];
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        tape.clear();
    }
}

TEST_CASE("probability is invariant to padding headroom and batch composition") {
    auto record = make_record({"error at node 3", "ok", "disk full"});
    ModelConfig small = tiny_config();
    ModelConfig roomy = tiny_config();
    roomy.max_events = 9;
    roomy.max_chars = 40;
    Model m_small(small, 7);
    // same seed and same layer shapes -> identical parameters
    Model m_roomy(roomy, 7);
    Tape t1, t2;
    const double p1 = m_small.forward(t1, encode_sequence(record, small))->data[0];
    const double p2 = m_roomy.forward(t2, encode_sequence(record, roomy))->data[0];
    t1.clear();
    t2.clear();
    CHECK(p1 == doctest::Approx(p2).epsilon(1e-15));

    // scored alone equals scored inside a batch
    Model model(tiny_config(), 21);
    auto other = make_record({"noise", "more noise"});
    Tape ta, tb;
    const double alone = model.forward(ta, encode_sequence(record, tiny_config()))->data[0];
    auto batch = model.forward_batch(
        tb, {encode_sequence(other, tiny_config()), encode_sequence(record, tiny_config())});
    ta.clear();
    tb.clear();
    CHECK(std::fabs(batch->data[1] - alone) <= 1e-12);
}

TEST_CASE("tiny-config forward equals the straight-line oracle") {
    Model model(tiny_config(), 1234);
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> events;
        const size_t n = 1 + rng.index(4);
        for (size_t e = 0; e < n; ++e) {
            std::string s;
            for (size_t i = 0; i < 1 + rng.index(6); ++i)
                s.push_back(static_cast<char>(32 + rng.index(95)));
            events.push_back(s);
        }
        auto record = make_record(events);
        Tape tape;
        const double got = model.forward(tape, encode_sequence(record, tiny_config()))->data[0];
        tape.clear();
        CHECK(got == doctest::Approx(forward_oracle(model, record)).epsilon(1e-12));
    }
}

TEST_CASE("full-model gradient check on the tiny config") {
    Model model(tiny_config(), 4242);
    auto enc1 = encode_sequence(make_record({"abc de", "fgh"}, 1), tiny_config());
    auto enc2 = encode_sequence(make_record({"zz 12", "q", "###"}, 0), tiny_config());
    auto forward = [&](Tape& t) {
        auto probs = model.forward_batch(t, {enc1, enc2});
        return weighted_bce_loss(t, probs, {1.0, 0.0}, 2.5);
    };
    std::vector<TensorPtr> inputs;
    for (const auto& [name, t] : model.parameters()) inputs.push_back(t);
    CHECK(grad_check(forward, inputs) <= 1e-3);
}

TEST_CASE("randomly initialized model is not dead") {
    // The 2-channel tiny config can legitimately go dead for unlucky seeds, so
    // this smoke test uses modest-but-realistic widths instead.
    ModelConfig cfg = tiny_config();
    cfg.embed_dim = 4;
    cfg.event_widths = {8, 8};
    cfg.event_kernels = {3, 3};
    cfg.seq_widths = {8};
    cfg.seq_kernels = {3};
    cfg.dense_widths = {8, 1};
    Model model(cfg, 31337);
    std::vector<SequenceRecord> records = {
        make_record({"aaaa"}), make_record({"zzzz", "yyy"}), make_record({"192.168.0.1 GET"}),
        make_record({"!!!", "???", "###"})};
    std::set<double> probs;
    for (const auto& r : records) {
        Tape tape;
        probs.insert(model.forward(tape, encode_sequence(r, cfg))->data[0]);
        tape.clear();
    }
    CHECK(probs.size() > 1);
}

TEST_CASE("predict threshold rule") {
    CHECK(predict(0.5) == 1);
    CHECK(predict(0.4999) == 0);
    CHECK(predict(0.2, 0.2) == 1);
}

TEST_CASE("model save/load round trip preserves behavior and checks hashes") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "hierlog_model_test.ckpt").string();
    Model model(tiny_config(), 555);
    auto record = make_record({"hello world", "goodbye"});
    Tape t1;
    const double before = model.forward(t1, encode_sequence(record, tiny_config()))->data[0];
    t1.clear();
    model.save(path);

    Model loaded = Model::load(path);
    Tape t2;
    const double after = loaded.forward(t2, encode_sequence(record, tiny_config()))->data[0];
    t2.clear();
    CHECK(before == after);

    // tampering with the config file must be detected
    {
        std::ofstream cfg(path + ".cfg", std::ios::app);
        cfg << "embed_dim = 4\n";
    }
    CHECK_THROWS_AS(Model::load(path), DataError);
    fs::remove(path);
    fs::remove(path + ".cfg");
}

TEST_CASE("model config text round trip and unknown keys") {
    ModelConfig cfg = tiny_config();
    auto round = config_from_text(config_to_text(cfg));
    CHECK(config_to_text(round) == config_to_text(cfg));
    CHECK(config_hash(round) == config_hash(cfg));
    CHECK_THROWS_AS(config_from_text("bogus_key = 3\n"), ConfigError);
}
