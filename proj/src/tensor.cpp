#include "radcap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radcap {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("matrix dimensions must be non-negative");
}

Matrix::Matrix(int r, int c, std::initializer_list<double> values) : Matrix(r, c) {
    if (values.size() != data.size())
        throw std::invalid_argument("initializer size does not match matrix dimensions");
    std::copy(values.begin(), values.end(), data.begin());
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

std::string shape_str(const Matrix& m) {
    return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul dimension mismatch: " + shape_str(a) + " x " + shape_str(b));
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        double* orow = &out.data[static_cast<size_t>(i) * b.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument(std::string(op) + " shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Matrix scaled(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.data) v *= s;
    return out;
}

Vector softmax(const Vector& v) {
    if (v.dim() < 1) throw std::invalid_argument("softmax of empty vector");
    const double m = *std::max_element(v.data.begin(), v.data.end());
    Vector out(v.dim());
    double sum = 0.0;
    for (int i = 0; i < v.dim(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (int i = 0; i < v.dim(); ++i) out[i] /= sum;
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        const double* row = &m.data[static_cast<size_t>(i) * m.cols];
        double mx = row[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        double* orow = &out.data[static_cast<size_t>(i) * m.cols];
        for (int j = 0; j < m.cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < m.cols; ++j) orow[j] /= sum;
    }
    return out;
}

Vector layer_norm(const Vector& x, const Vector& gamma, const Vector& beta, double eps) {
    if (x.dim() != gamma.dim() || x.dim() != beta.dim())
        throw std::invalid_argument("layer_norm dimension mismatch: x=" + std::to_string(x.dim()) +
                                    " gamma=" + std::to_string(gamma.dim()) +
                                    " beta=" + std::to_string(beta.dim()));
    if (eps < 0.0) throw std::invalid_argument("layer_norm eps must be non-negative");
    const int n = x.dim();
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        var += d * d;
    }
    var /= n;
    const double denom = std::sqrt(var + eps);
    Vector out(n);
    for (int i = 0; i < n; ++i) out[i] = gamma[i] * (x[i] - mean) / denom + beta[i];
    return out;
}

double cosine_similarity(const Vector& u, const Vector& v) {
    if (u.dim() != v.dim())
        throw std::invalid_argument("cosine_similarity dimension mismatch: " + std::to_string(u.dim()) +
                                    " vs " + std::to_string(v.dim()));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (int i = 0; i < u.dim(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    // sqrt(nu*nv) keeps cos(v,v) exactly 1: sqrt rounds fl(x*x) back to x
    return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Vector& v) {
    for (double x : v.data)
        if (!std::isfinite(x)) return false;
    return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

Matrix sinusoidal_positions(int n_positions, int dim) {
    Matrix pe(n_positions, dim);
    for (int pos = 0; pos < n_positions; ++pos) {
        for (int i = 0; i < dim; ++i) {
            const double exponent = static_cast<double>(i - (i % 2)) / dim;
            const double angle = pos / std::pow(10000.0, exponent);
            pe.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

void fill_uniform(Matrix& m, std::mt19937_64& rng, double limit) {
    for (double& v : m.data) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

void xavier_uniform(Matrix& m, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (m.rows + m.cols));
    fill_uniform(m, rng, limit);
}

}  // namespace radcap
