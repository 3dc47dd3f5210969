#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lgsm/matrix.hpp"
#include "lgsm/rng.hpp"

namespace lgsm {

struct ParamSlot {
    Matrix value;
    Matrix grad;

    ParamSlot() = default;
    ParamSlot(int r, int c) : value(r, c), grad(r, c) {}

    void zero_grad() { grad.zero(); }
};

inline constexpr double kInvSqrt2 = 0.7071067811865476;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Exact (erf) GELU.
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

inline double gelu_grad(double x) {
    double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

inline Matrix gelu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.data) v = gelu(v);
    return y;
}

enum class Activation { Gelu, Identity };

// Two-layer MLP, hidden width 4× the input width.
struct Ffn {
    ParamSlot w1, b1, w2, b2;
    Activation act = Activation::Gelu;

    int in_dim() const { return w1.value.rows; }
    int hidden_dim() const { return w1.value.cols; }
    int out_dim() const { return w2.value.cols; }

    static Ffn init(int in, int out, Rng& rng, Activation act = Activation::Gelu) {
        Ffn f;
        int h = 4 * in;
        f.w1 = ParamSlot(in, h);
        f.b1 = ParamSlot(1, h);
        f.w2 = ParamSlot(h, out);
        f.b2 = ParamSlot(1, out);
        f.act = act;
        fill_uniform(f.w1.value, rng, 1.0 / std::sqrt(static_cast<double>(in)));
        fill_uniform(f.w2.value, rng, 1.0 / std::sqrt(static_cast<double>(h)));
        return f;
    }

    std::vector<ParamSlot*> slots() { return {&w1, &b1, &w2, &b2}; }
};

struct FfnCache {
    Matrix z1;  // pre-activation
    Matrix a1;  // post-activation
};

inline Matrix ffn_forward(const Ffn& f, const Matrix& x, FfnCache* cache = nullptr) {
    check_shape(x.cols == f.in_dim(), "ffn input");
    Matrix z1 = matmul(x, f.w1.value);
    for (int i = 0; i < z1.rows; ++i)
        for (int j = 0; j < z1.cols; ++j) z1(i, j) += f.b1.value(0, j);
    Matrix a1 = f.act == Activation::Gelu ? gelu(z1) : z1;
    Matrix y = matmul(a1, f.w2.value);
    for (int i = 0; i < y.rows; ++i)
        for (int j = 0; j < y.cols; ++j) y(i, j) += f.b2.value(0, j);
    if (cache) {
        cache->z1 = std::move(z1);
        cache->a1 = std::move(a1);
    }
    return y;
}

// Returns grad wrt x; accumulates parameter grads.
inline Matrix ffn_backward(Ffn& f, const Matrix& x, const FfnCache& cache, const Matrix& upstream) {
    check_shape(upstream.rows == x.rows && upstream.cols == f.out_dim(), "ffn upstream");
    matmul_tn_into(cache.a1, upstream, f.w2.grad, true);
    for (int i = 0; i < upstream.rows; ++i)
        for (int j = 0; j < upstream.cols; ++j) f.b2.grad(0, j) += upstream(i, j);
    Matrix da1(x.rows, f.hidden_dim());
    matmul_nt_into(upstream, f.w2.value, da1);
    if (f.act == Activation::Gelu)
        for (int i = 0; i < da1.rows; ++i)
            for (int j = 0; j < da1.cols; ++j) da1(i, j) *= gelu_grad(cache.z1(i, j));
    matmul_tn_into(x, da1, f.w1.grad, true);
    for (int i = 0; i < da1.rows; ++i)
        for (int j = 0; j < da1.cols; ++j) f.b1.grad(0, j) += da1(i, j);
    Matrix dx(x.rows, x.cols);
    matmul_nt_into(da1, f.w1.value, dx);
    return dx;
}

struct LayerNorm {
    ParamSlot gain, bias;
    double eps = 1e-5;
    bool bypass = false;  // test hook: forward/backward become identity

    static LayerNorm init(int d, double eps = 1e-5) {
        LayerNorm ln;
        ln.gain = ParamSlot(1, d);
        ln.bias = ParamSlot(1, d);
        std::fill(ln.gain.value.data.begin(), ln.gain.value.data.end(), 1.0);
        ln.eps = eps;
        return ln;
    }

    std::vector<ParamSlot*> slots() { return {&gain, &bias}; }
};

struct LayerNormCache {
    Matrix xhat;
    std::vector<double> inv_std;
};

// Per row: (x - mean) / sqrt(population var + eps) * gain + bias.
inline Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x, LayerNormCache* cache = nullptr) {
    if (ln.bypass) {
        if (cache) cache->xhat = Matrix();
        return x;
    }
    check_shape(x.cols == ln.gain.value.cols, "layernorm width");
    int d = x.cols;
    Matrix y(x.rows, d);
    Matrix xhat(x.rows, d);
    std::vector<double> inv_std(x.rows);
    for (int i = 0; i < x.rows; ++i) {
        const double* r = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += r[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = r[j] - mean;
            var += c * c;
        }
        var /= d;
        double is = 1.0 / std::sqrt(var + ln.eps);
        inv_std[i] = is;
        for (int j = 0; j < d; ++j) {
            double xh = (r[j] - mean) * is;
            xhat(i, j) = xh;
            y(i, j) = xh * ln.gain.value(0, j) + ln.bias.value(0, j);
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

inline Matrix layernorm_backward(LayerNorm& ln, const LayerNormCache& cache, const Matrix& upstream) {
    if (ln.bypass) return upstream;
    int d = upstream.cols;
    Matrix dx(upstream.rows, d);
    for (int i = 0; i < upstream.rows; ++i) {
        const double* up = upstream.row(i);
        const double* xh = cache.xhat.row(i);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
            ln.gain.grad(0, j) += up[j] * xh[j];
            ln.bias.grad(0, j) += up[j];
            double dxh = up[j] * ln.gain.value(0, j);
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
        }
        double m1 = sum_dxhat / d, m2 = sum_dxhat_xhat / d;
        for (int j = 0; j < d; ++j) {
            double dxh = up[j] * ln.gain.value(0, j);
            dx(i, j) = cache.inv_std[i] * (dxh - m1 - xh[j] * m2);
        }
    }
    return dx;
}

// Central finite differences over every parameter and input coordinate.
// loss() evaluates the scalar objective at current values; backward() must
// zero grads, rerun forward, and populate both param grads and *input_grad.
inline double grad_check(const std::vector<ParamSlot*>& slots, Matrix* input, Matrix* input_grad,
                         const std::function<double()>& loss, const std::function<void()>& backward,
                         double step = 1e-5) {
    backward();
    std::vector<Matrix> analytic;
    for (ParamSlot* s : slots) analytic.push_back(s->grad);
    Matrix input_analytic = input_grad ? *input_grad : Matrix();

    double max_rel = 0.0;
    auto probe = [&](double* coord, double a) {
        double orig = *coord;
        *coord = orig + step;
        double up = loss();
        *coord = orig - step;
        double down = loss();
        *coord = orig;
        double fd = (up - down) / (2.0 * step);
        double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        if (rel > max_rel) max_rel = rel;
    };
    for (size_t s = 0; s < slots.size(); ++s)
        for (size_t i = 0; i < slots[s]->value.size(); ++i)
            probe(&slots[s]->value.data[i], analytic[s].data[i]);
    if (input)
        for (size_t i = 0; i < input->size(); ++i) probe(&input->data[i], input_analytic.data[i]);
    return max_rel;
}

}  // namespace lgsm
