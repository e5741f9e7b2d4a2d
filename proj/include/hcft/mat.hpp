#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hcft/rng.hpp"

namespace hcft {

// Dense row-major matrix of doubles. Shapes are checked at every public
// boundary; silent broadcasting is not a thing here.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }
    static Matrix randn(std::size_t r, std::size_t c, double scale, Rng& rng);

    void require_finite(const std::string& where) const;
};

enum class Activation { Tanh, Sigmoid, SoftmaxRows, Relu };

// out[r][c] = sum_k x[r][k] * W[k][c] + b[c]
Matrix affine(const Matrix& x, const Matrix& W, const std::vector<double>& b);

// Backward of affine: given upstream dOut, produces dX, dW, db.
struct AffineGrads {
    Matrix dx;
    Matrix dW;
    std::vector<double> db;
};
AffineGrads affine_backward(const Matrix& x, const Matrix& W, const Matrix& dout);

Matrix activate(const Matrix& x, Activation kind);

// Softmax over each row with max-shift; rows sum to 1 within 1e-12 for any
// finite input.
Matrix softmax_rows(const Matrix& x);

struct CrossEntropyResult {
    double loss;
    Matrix grad;  // d loss / d logits, already divided by row count
};
CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& targets);

// Max over coordinates of the relative disagreement between an analytic
// gradient and central finite differences (h = 1e-5).
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& theta,
                  const std::vector<double>& analytic_grad);

// Adam state for one flat parameter vector.
struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m, v;
    long step_count = 0;

    void step(std::vector<double>& params, const std::vector<double>& grad, double lr);
};

}  // namespace hcft
