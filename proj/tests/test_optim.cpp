#include <doctest.h>

#include <cmath>

#include "bd/optim.hpp"
#include "bd/ops.hpp"

using namespace bd;

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(cosine_lr(0, 200, 0.1) == 0.1);
    CHECK(cosine_lr(200, 200, 0.1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_lr(100, 200, 0.1) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(201, 200, 0.1), ContractError);
    CHECK_THROWS_AS(cosine_lr(-1, 200, 0.1), ContractError);
}

TEST_CASE("cosine schedule is monotonically nonincreasing") {
    double prev = cosine_lr(0, 137, 0.3);
    for (int64_t t = 1; t <= 137; ++t) {
        double cur = cosine_lr(t, 137, 0.3);
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("sgd: vanilla step") {
    Tensor p = Tensor::param({1}, {0.0});
    p.grad_mut()[0] = 1.0;
    SgdOptimizer opt(0.1, 0.0, 0.0);
    std::vector<nn::Param> params = {{"p", &p}};
    opt.step(params);
    CHECK(p.data()[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK_FALSE(p.has_grad());  // grads zeroed after the step
}

TEST_CASE("sgd: momentum recurrence unrolled by hand") {
    // v1 = 1, p1 = -1; v2 = 0.9 + 1 = 1.9, p2 = -2.9
    Tensor p = Tensor::param({1}, {0.0});
    SgdOptimizer opt(1.0, 0.9, 0.0);
    std::vector<nn::Param> params = {{"p", &p}};
    p.grad_mut()[0] = 1.0;
    opt.step(params);
    CHECK(p.data()[0] == doctest::Approx(-1.0).epsilon(1e-15));
    p.grad_mut()[0] = 1.0;
    opt.step(params);
    CHECK(p.data()[0] == doctest::Approx(-2.9).epsilon(1e-15));
}

TEST_CASE("sgd: weight decay moves a parameter with zero gradient") {
    Tensor p = Tensor::param({1}, {2.0});
    p.grad_mut()[0] = 0.0;
    SgdOptimizer opt(0.1, 0.0, 0.0005);
    std::vector<nn::Param> params = {{"p", &p}};
    opt.step(params);
    CHECK(p.data()[0] < 2.0);
    CHECK(p.data()[0] == doctest::Approx(2.0 - 0.1 * 0.0005 * 2.0).epsilon(1e-12));
}

TEST_CASE("sgd: missing gradient is a contract error under strict mode") {
    Tensor p = Tensor::param({1}, {1.0});
    SgdOptimizer opt(0.1, 0.9, 0.0);
    std::vector<nn::Param> params = {{"p", &p}};
    set_strict_numerics(true);
    CHECK_THROWS_AS(opt.step(params), ContractError);
    set_strict_numerics(false);
    opt.step(params);  // lenient mode treats it as a zero gradient
}
