#include "hcft/mat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hcft/errors.hpp"

namespace hcft {

namespace {
std::string shape_str(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}
}  // namespace

Matrix Matrix::randn(std::size_t r, std::size_t c, double scale, Rng& rng) {
    Matrix m(r, c);
    for (auto& v : m.data) v = scale * rng.normal();
    return m;
}

void Matrix::require_finite(const std::string& where) const {
    for (double v : data) {
        if (!std::isfinite(v)) throw DataError("non-finite value in " + where);
    }
}

Matrix affine(const Matrix& x, const Matrix& W, const std::vector<double>& b) {
    if (x.cols != W.rows)
        throw DimensionError("affine: x is " + shape_str(x.rows, x.cols) + " but W is " +
                             shape_str(W.rows, W.cols));
    if (b.size() != W.cols)
        throw DimensionError("affine: bias length " + std::to_string(b.size()) +
                             " does not match W cols " + std::to_string(W.cols));
    Matrix out(x.rows, W.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < W.cols; ++c) out(r, c) = b[c];
        for (std::size_t k = 0; k < x.cols; ++k) {
            double xv = x(r, k);
            for (std::size_t c = 0; c < W.cols; ++c) out(r, c) += xv * W(k, c);
        }
    }
    out.require_finite("affine output");
    return out;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& W, const Matrix& dout) {
    if (dout.rows != x.rows || dout.cols != W.cols)
        throw DimensionError("affine_backward: dout is " + shape_str(dout.rows, dout.cols) +
                             ", expected " + shape_str(x.rows, W.cols));
    AffineGrads g;
    g.dx = Matrix(x.rows, x.cols);
    g.dW = Matrix(W.rows, W.cols);
    g.db.assign(W.cols, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < W.cols; ++c) {
            double d = dout(r, c);
            g.db[c] += d;
            for (std::size_t k = 0; k < x.cols; ++k) {
                g.dW(k, c) += x(r, k) * d;
                g.dx(r, k) += W(k, c) * d;
            }
        }
    }
    return g;
}

Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < x.cols; ++c) mx = std::max(mx, x(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) {
            out(r, c) = std::exp(x(r, c) - mx);
            sum += out(r, c);
        }
        for (std::size_t c = 0; c < x.cols; ++c) out(r, c) /= sum;
    }
    out.require_finite("softmax output");
    return out;
}

Matrix activate(const Matrix& x, Activation kind) {
    if (kind == Activation::SoftmaxRows) return softmax_rows(x);
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        double v = x.data[i];
        switch (kind) {
            case Activation::Tanh: out.data[i] = std::tanh(v); break;
            case Activation::Sigmoid: out.data[i] = 1.0 / (1.0 + std::exp(-v)); break;
            case Activation::Relu: out.data[i] = v > 0.0 ? v : 0.0; break;
            case Activation::SoftmaxRows: break;  // handled above
        }
    }
    out.require_finite("activation output");
    return out;
}

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& targets) {
    if (targets.size() != logits.rows)
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(logits.rows) + " rows");
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= logits.cols)
            throw DimensionError("cross_entropy: target " + std::to_string(t) +
                                 " out of range for " + std::to_string(logits.cols) + " classes");
    }
    Matrix probs = softmax_rows(logits);
    double loss = 0.0;
    Matrix grad = probs;
    double inv_rows = 1.0 / static_cast<double>(logits.rows);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        // recompute log prob with log-sum-exp for stability
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < logits.cols; ++c) mx = std::max(mx, logits(r, c));
        double lse = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) lse += std::exp(logits(r, c) - mx);
        lse = mx + std::log(lse);
        loss += lse - logits(r, static_cast<std::size_t>(targets[r]));
        grad(r, static_cast<std::size_t>(targets[r])) -= 1.0;
        for (std::size_t c = 0; c < logits.cols; ++c) grad(r, c) *= inv_rows;
    }
    return {loss * inv_rows, std::move(grad)};
}

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& theta,
                  const std::vector<double>& analytic_grad) {
    const double h = 1e-5;
    double worst = 0.0;
    std::vector<double> t = theta;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double orig = t[i];
        t[i] = orig + h;
        double fp = f(t);
        t[i] = orig - h;
        double fm = f(t);
        t[i] = orig;
        double numeric = (fp - fm) / (2.0 * h);
        double denom = std::max(1e-8, std::abs(analytic_grad[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic_grad[i] - numeric) / denom);
    }
    return worst;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    if (m.empty()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
    }
    if (grad.size() != params.size())
        throw DimensionError("adam: gradient length mismatch");
    ++step_count;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace hcft
