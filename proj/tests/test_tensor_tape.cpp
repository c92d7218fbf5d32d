#include <doctest.h>

#include "bd/oracle/oracle.hpp"
#include "bd/ops.hpp"
#include "bd/tape.hpp"
#include "test_util.hpp"

using namespace bd;

TEST_CASE("apply elementwise add") {
    Tensor a = Tensor::from_data({2}, {1, 2});
    Tensor b = Tensor::from_data({2}, {3, 4});
    Tensor out = apply(OpKind::Add, {a, b});
    CHECK(out.vec() == std::vector<double>{4, 6});
}

TEST_CASE("apply matmul identity") {
    Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Rng rng(11);
    Tensor x = bdtest::random_tensor(rng, {3, 5});
    Tensor out = apply(OpKind::Matmul, {eye, x});
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("apply conv2d all-ones 3x3 gives 9") {
    Tensor x = Tensor::from_data({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    Tensor w = Tensor::from_data({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    OpAttrs at;
    at.stride = 1;
    at.pad = 0;
    Tensor out = apply(OpKind::Conv2d, {x, w}, at);
    CHECK(out.numel() == 1);
    CHECK(out.item() == doctest::Approx(9.0));
}

TEST_CASE("apply rejects shape mismatch with op name") {
    Tensor a = Tensor::from_data({2, 3}, std::vector<double>(6, 0.0));
    Tensor b = Tensor::from_data({2, 4}, std::vector<double>(8, 0.0));
    CHECK_THROWS_WITH_AS(apply(OpKind::Mul, {a, b}),
                         doctest::Contains("mul"), ContractError);
}

TEST_CASE("strict mode flags non-finite op output") {
    set_strict_numerics(true);
    Tensor a = Tensor::from_data({1}, {1e308});
    OpAttrs at;
    at.scalar = 1e308;
    CHECK_THROWS_AS(apply(OpKind::MulScalar, {a}, at), NumericError);
    set_strict_numerics(false);
}

TEST_CASE("backward of sum gives all-ones") {
    Tensor x = Tensor::param({2, 2}, {1, 2, 3, 4});
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum_all(x));
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum of squares gives 2x") {
    Tensor x = Tensor::param({1}, {3.0});
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum_all(mul(x, x)));
    CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("backward of softmax-onehot mean matches finite differences") {
    Rng rng(5);
    int64_t b = 3, c = 6;
    Tensor a = bdtest::random_param(rng, {b, c}, -2.0, 2.0);
    std::vector<int64_t> labels = {1, 5, 0};
    Tensor oh = onehot(labels, c);

    Tape tape;
    TapeScope scope(tape);
    tape.backward(mean_all(mul(softmax_rows(a), oh)));

    auto fd = oracle::fd_grad_tensor(
        [&](const Tensor& t) { return mean_all(mul(softmax_rows(t), oh)).item(); }, a);
    CHECK(oracle::max_relative_error(a.grad(), fd) <= 1e-6);
}

TEST_CASE("backward requires a scalar recorded on the tape") {
    Tensor x = Tensor::param({2}, {1, 2});
    Tape tape;
    TapeScope scope(tape);
    Tensor y = mul_scalar(x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);           // not scalar
    CHECK_THROWS_AS(tape.backward(y.detach()), ContractError);  // detached
}

TEST_CASE("detach keeps values and blocks gradient flow") {
    Tensor x = Tensor::param({3}, {1, 2, 3});
    Tensor d = x.detach();
    CHECK(d.vec() == x.vec());
    CHECK_FALSE(d.requires_grad());

    Tensor w = Tensor::param({3}, {4, 5, 6});
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum_all(mul(x.detach(), w)));
    CHECK_FALSE(x.has_grad());
    CHECK(w.grad() == std::vector<double>{1, 2, 3});
}

TEST_CASE("gradient accumulation across two uses is the exact sum") {
    Rng rng(17);
    Tensor x = bdtest::random_param(rng, {4});
    Tensor r1 = bdtest::random_tensor(rng, {4});
    Tensor r2 = bdtest::random_tensor(rng, {4});

    auto grad_single = [&](const Tensor& r) {
        Tensor x2 = Tensor::param({4}, x.vec());
        Tape tape;
        TapeScope scope(tape);
        tape.backward(sum_all(mul(x2, r)));
        return x2.grad();
    };
    auto g1 = grad_single(r1);
    auto g2 = grad_single(r2);

    Tape tape;
    TapeScope scope(tape);
    tape.backward(add(sum_all(mul(x, r1)), sum_all(mul(x, r2))));
    for (size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == g1[i] + g2[i]);
}

TEST_CASE("detach barrier equals constant injection downstream") {
    Rng rng(23);
    Tensor x = bdtest::random_param(rng, {3, 3});
    Tensor w = bdtest::random_param(rng, {3, 3});

    auto run = [&](bool inject_const) {
        Tensor w2 = Tensor::param({3, 3}, w.vec());
        Tape tape;
        TapeScope scope(tape);
        Tensor mid;
        if (inject_const) {
            Tensor x2 = Tensor::param({3, 3}, x.vec());
            Tensor computed = square(x2);
            mid = Tensor::from_data({3, 3}, computed.vec());
        } else {
            Tensor x2 = Tensor::param({3, 3}, x.vec());
            mid = square(x2).detach();
        }
        tape.backward(sum_all(mul(mid, w2)));
        return w2.grad();
    };
    CHECK(run(false) == run(true));
}

TEST_CASE("clearing the tape invalidates nodes atomically") {
    Tensor x = Tensor::param({2}, {1, 2});
    Tape tape;
    TapeScope scope(tape);
    Tensor y = mul_scalar(x, 3.0);
    CHECK(y.requires_grad());
    tape.clear();
    // stale results act as constants; leaves re-register cleanly
    Tensor w = Tensor::param({2}, {1, 1});
    tape.backward(sum_all(mul(y, w)));
    CHECK_FALSE(x.has_grad());
    CHECK(w.grad() == std::vector<double>{3, 6});
}
