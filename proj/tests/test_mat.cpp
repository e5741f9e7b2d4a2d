#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hcft/errors.hpp"
#include "hcft/mat.hpp"

using namespace hcft;

namespace {

// Independent naive triple-loop matmul oracle.
Matrix matmul_oracle(const Matrix& a, const Matrix& b, const std::vector<double>& bias) {
    Matrix out(a.rows, b.cols);
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < b.cols; ++c) {
            double acc = bias[c];
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(r, k) * b(k, c);
            out(r, c) = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("affine identity weight") {
    Matrix x(1, 2);
    x.data = {1, 2};
    Matrix w(2, 2);
    w.data = {1, 0, 0, 1};
    Matrix out = affine(x, w, {0, 0});
    CHECK(out(0, 0) == doctest::Approx(1));
    CHECK(out(0, 1) == doctest::Approx(2));
}

TEST_CASE("affine hand arithmetic") {
    Matrix x(1, 2);
    x.data = {1, 1};
    Matrix w(2, 1);
    w.data = {2, 3};
    Matrix out = affine(x, w, {1});
    CHECK(out(0, 0) == doctest::Approx(6));
}

TEST_CASE("affine matches triple-loop oracle on random shapes") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t m = 1 + rng.below(64), k = 1 + rng.below(64), n = 1 + rng.below(64);
        Matrix x = Matrix::randn(m, k, 1.0, rng);
        Matrix w = Matrix::randn(k, n, 1.0, rng);
        std::vector<double> b(n);
        for (auto& v : b) v = rng.normal();
        Matrix got = affine(x, w, b);
        Matrix want = matmul_oracle(x, w, b);
        for (std::size_t i = 0; i < got.data.size(); ++i) {
            double denom = std::max(1.0, std::abs(want.data[i]));
            CHECK(std::abs(got.data[i] - want.data[i]) / denom < 1e-12);
        }
    }
}

TEST_CASE("affine shape mismatch names both shapes") {
    Matrix x(1, 3), w(2, 2);
    CHECK_THROWS_AS(affine(x, w, {0, 0}), DimensionError);
    try {
        affine(x, w, {0, 0});
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("1x3") != std::string::npos);
        CHECK(msg.find("2x2") != std::string::npos);
    }
}

TEST_CASE("activations") {
    Matrix x(1, 1);
    x.data = {0.0};
    CHECK(activate(x, Activation::Sigmoid)(0, 0) == doctest::Approx(0.5));

    Matrix sym(1, 3);
    sym.data = {3.7, 3.7, 3.7};
    Matrix sm = activate(sym, Activation::SoftmaxRows);
    for (int c = 0; c < 3; ++c) CHECK(sm(0, c) == doctest::Approx(1.0 / 3.0));

    Matrix big(1, 2);
    big.data = {1e4, -1e4};
    Matrix th = activate(big, Activation::Tanh);
    CHECK(th(0, 0) == doctest::Approx(1.0));
    CHECK(th(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("softmax rows sum to one under extreme spread") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix x(3, 5);
        for (auto& v : x.data) v = rng.uniform(-400.0, 400.0);
        x(0, 0) = 380.0;
        x(0, 1) = -380.0;  // spread >= 700
        Matrix sm = softmax_rows(x);
        for (std::size_t r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < 5; ++c) sum += sm(r, c);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("cross entropy basics") {
    Matrix logits(1, 2);
    logits.data = {0, 0};
    auto r = cross_entropy(logits, {0});
    CHECK(r.loss == doctest::Approx(std::log(2.0)));

    logits.data = {10, -10};
    CHECK(cross_entropy(logits, {0}).loss == doctest::Approx(0.0).epsilon(1e-6));

    CHECK_THROWS_AS(cross_entropy(logits, {5}), DimensionError);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(11);
    Matrix logits = Matrix::randn(4, 3, 1.0, rng);
    std::vector<int> targets = {0, 2, 1, 2};
    auto r = cross_entropy(logits, targets);
    auto f = [&](const std::vector<double>& theta) {
        Matrix l = logits;
        l.data = theta;
        return cross_entropy(l, targets).loss;
    };
    CHECK(grad_check(f, logits.data, r.grad.data) < 1e-4);
}

TEST_CASE("grad_check on a quadratic") {
    std::vector<double> theta = {1.5, -2.0, 0.25};
    auto f = [](const std::vector<double>& t) {
        double s = 0.0;
        for (double v : t) s += v * v;
        return s;
    };
    std::vector<double> grad = {3.0, -4.0, 0.5};
    CHECK(grad_check(f, theta, grad) < 1e-8);
}

TEST_CASE("adam shrinks a quadratic") {
    std::vector<double> theta = {5.0, -3.0};
    Adam adam;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> grad = {2 * theta[0], 2 * theta[1]};
        adam.step(theta, grad, 0.01);
    }
    CHECK(std::abs(theta[0]) < 0.05);
    CHECK(std::abs(theta[1]) < 0.05);
}
