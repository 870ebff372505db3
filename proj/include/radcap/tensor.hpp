#ifndef RADCAP_TENSOR_HPP
#define RADCAP_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace radcap {

// Dense row-major matrix, double precision. The whole model stack runs on
// doubles so finite-difference gradient checks have enough headroom.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0);
    Matrix(int r, int c, std::initializer_list<double> values);

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    bool empty() const { return rows == 0 || cols == 0; }
    size_t size() const { return data.size(); }

    static Matrix identity(int n);

    bool operator==(const Matrix& other) const = default;
};

struct Vector {
    std::vector<double> data;

    Vector() = default;
    explicit Vector(int n, double fill = 0.0) : data(static_cast<size_t>(n), fill) {}
    Vector(std::initializer_list<double> values) : data(values) {}

    int dim() const { return static_cast<int>(data.size()); }
    double& operator[](int i) { return data[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data[static_cast<size_t>(i)]; }

    bool operator==(const Vector& other) const = default;
};

// a.cols must equal b.rows; throws std::invalid_argument reporting both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Element-wise helpers; shapes must match.
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);

// Numerically stable softmax (max subtraction). Rejects empty input.
Vector softmax(const Vector& v);

// Row-wise softmax of a matrix, same stability trick.
Matrix softmax_rows(const Matrix& m);

// y = gamma * (x - mean) / sqrt(var + eps) + beta, population variance.
Vector layer_norm(const Vector& x, const Vector& gamma, const Vector& beta, double eps);

// Zero-norm inputs yield 0 so degenerate embeddings never produce NaN.
double cosine_similarity(const Vector& u, const Vector& v);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

double max_abs_diff(const Matrix& a, const Matrix& b);

std::string shape_str(const Matrix& m);

// Fixed sinusoidal position encodings, one row per position.
Matrix sinusoidal_positions(int n_positions, int dim);

}  // namespace radcap

#include <random>

namespace radcap {

// Uniform double in [0,1) built from the top 53 bits of the generator
// output; exact conversion, so identical seeds give identical doubles on
// every IEEE-754 platform.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void fill_uniform(Matrix& m, std::mt19937_64& rng, double limit);

// Xavier/Glorot uniform with fan_in = rows, fan_out = cols.
void xavier_uniform(Matrix& m, std::mt19937_64& rng);

}  // namespace radcap

#endif
