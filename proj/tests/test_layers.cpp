#include <doctest.h>

#include <cmath>

#include "hierlog/gradcheck.hpp"
#include "hierlog/layers.hpp"

using namespace hierlog;

TEST_CASE("embedding pad row is zero and lookups gather rows") {
    Rng rng(1);
    EmbeddingTable table(5, 3, rng);
    for (size_t j = 0; j < 3; ++j) CHECK(table.weights->data[j] == 0.0);

    // one-hot basis rows
    for (size_t r = 0; r < 5; ++r)
        for (size_t j = 0; j < 3; ++j) table.weights->data[r * 3 + j] = (j == r % 3) ? 1.0 : 0.0;
    Tape tape;
    std::vector<uint16_t> idx = {0, 2, 4};
    auto out = embed_lookup(tape, table, idx, {3});
    CHECK(out->shape == std::vector<size_t>{3, 3});
    for (size_t j = 0; j < 3; ++j) CHECK(out->data[j] == table.weights->data[0 * 3 + j]);
    for (size_t j = 0; j < 3; ++j) CHECK(out->data[3 + j] == table.weights->data[2 * 3 + j]);

    std::vector<uint16_t> bad = {7};
    CHECK_THROWS_AS(embed_lookup(tape, table, bad, {1}), DataError);
}

TEST_CASE("embed lookup gather equals loop oracle, scatter sums upstream rows") {
    Rng rng(5);
    EmbeddingTable table(9, 4, rng);
    std::vector<uint16_t> idx;
    for (int i = 0; i < 24; ++i) idx.push_back(static_cast<uint16_t>(rng.index(9)));
    Tape tape;
    auto out = embed_lookup(tape, table, idx, {2, 3, 4});
    CHECK(out->shape == std::vector<size_t>{2, 3, 4, 4});
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = 0; j < 4; ++j)
            CHECK(out->data[i * 4 + j] == table.weights->data[idx[i] * 4 + j]);

    // upstream gradient of all ones: table grad row r = count of r, pad row 0
    Tape t2;
    table.weights->zero_grad();
    auto out2 = embed_lookup(t2, table, idx, {24});
    auto ones = make_tensor({1, 24});
    for (double& v : ones->data) v = 1.0;
    auto colsum = make_tensor({4, 1}, {1, 1, 1, 1});
    auto loss = matmul(t2, ones, matmul(t2, out2, colsum));
    t2.backward(loss);
    std::vector<double> counts(9, 0.0);
    for (uint16_t i : idx) counts[i] += 1.0;
    for (size_t r = 0; r < 9; ++r)
        for (size_t j = 0; j < 4; ++j)
            CHECK(table.weights->grad[r * 4 + j] == (r == 0 ? 0.0 : counts[r]));
}

TEST_CASE("conv block: config validation and composition") {
    Rng rng(9);
    CHECK_THROWS_AS(ConvBlock(2, {4, 4}, {3}, rng), ConfigError);
    CHECK_THROWS_AS(ConvBlock(2, {4}, {2}, rng), ConfigError);

    // 3 layers equals composing conv1d + relu by hand
    ConvBlock block(2, {3, 4, 2}, {3, 1, 5}, rng);
    auto in = make_tensor({6, 2});
    for (double& v : in->data) v = rng.uniform(-1, 1);
    Tape tape;
    auto got = block.apply(tape, in);
    TensorPtr x = in;
    for (const auto& layer : block.layers) {
        Tape t;
        x = relu(t, conv1d(t, x, layer.kernel, layer.bias));
    }
    CHECK(got->data == x->data);
    CHECK(got->shape == std::vector<size_t>{6, 2});  // length preserved
}

TEST_CASE("conv block output length equals input length for odd kernels") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t L = 1 + rng.index(15);
        ConvBlock block(3, {2, 5}, {2 * rng.index(4) + 1, 2 * rng.index(4) + 1}, rng);
        auto in = make_tensor({L, 3});
        Tape tape;
        CHECK(block.apply(tape, in)->shape == std::vector<size_t>{L, 5});
    }
}

TEST_CASE("dense block ends in sigmoid scalar") {
    Rng rng(17);
    CHECK_THROWS_AS(DenseBlock(4, {8, 2}, rng), ConfigError);
    DenseBlock head(4, {8, 1}, rng);
    auto in = make_tensor({2, 4});
    for (double& v : in->data) v = rng.uniform(-3, 3);
    Tape tape;
    auto out = head.apply(tape, in);
    CHECK(out->shape == std::vector<size_t>{2, 1});
    for (double p : out->data) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto p = make_tensor({3}, {1.0, -2.0, 0.5}, true);
    NamedParams params = {{"p", p}};
    AdamState opt(AdamConfig{});
    p->zero_grad();
    opt.step(params);
    CHECK(p->data == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam: first step with constant gradient is about -lr") {
    auto p = make_tensor({1}, {0.0}, true);
    NamedParams params = {{"p", p}};
    AdamState opt(AdamConfig{.lr = 0.1});
    p->grad[0] = 1.0;
    opt.step(params);
    // bias-corrected first step: -lr * g / (|g| + eps') ~= -lr
    CHECK(p->data[0] == doctest::Approx(-0.1).epsilon(1e-4));
}

TEST_CASE("adam strictly decreases a convex quadratic") {
    auto x = make_tensor({1}, {1.0}, true);
    NamedParams params = {{"x", x}};
    AdamState opt(AdamConfig{.lr = 0.05});
    double prev = x->data[0] * x->data[0];
    for (int step = 0; step < 2; ++step) {
        x->zero_grad();
        x->grad[0] = 2.0 * x->data[0];
        opt.step(params);
        const double now = x->data[0] * x->data[0];
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("adam reports missing gradients by name") {
    auto p = make_tensor({2}, true);
    p->grad.clear();
    NamedParams params = {{"event_conv.0.kernel", p}};
    AdamState opt;
    CHECK_THROWS_WITH_AS(opt.step(params), doctest::Contains("event_conv.0.kernel"),
                         TrainingError);
}

TEST_CASE("embedding pad row stays zero through training updates") {
    Rng rng(23);
    EmbeddingTable table(6, 3, rng);
    NamedParams params = {{"embedding.weights", table.weights}};
    AdamState opt;
    std::vector<uint16_t> idx = {0, 1, 2, 0, 5};
    for (int step = 0; step < 10; ++step) {
        table.weights->zero_grad();
        Tape tape;
        auto out = embed_lookup(tape, table, idx, {5});
        auto w = make_tensor({3, 1}, {0.2, -0.7, 1.0});
        auto ones = make_tensor({1, 5});
        for (double& v : ones->data) v = 1.0;
        auto loss = matmul(tape, ones, matmul(tape, out, w));
        tape.backward(loss);
        opt.step(params);
    }
    for (size_t j = 0; j < 3; ++j) CHECK(table.weights->data[j] == 0.0);
}
