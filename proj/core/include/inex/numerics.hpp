#pragma once

#include <cstddef>
#include <vector>

namespace inex {

using Vec = std::vector<double>;

// Dense row-major matrix. Small enough at desk scale that a flat vector
// beats pulling in a linear-algebra dependency the oracles would then share.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// A nonnegative vector summing to 1 (checked on construction).
struct ProbVector {
  Vec values;

  explicit ProbVector(Vec v);
  std::size_t size() const { return values.size(); }
};

enum class Activation { Relu, Silu };

// Numerically stable softmax (max-subtraction). Throws std::invalid_argument
// on empty or non-finite input.
ProbVector softmax(const Vec& v);

// Entropy in nats with the 0*log(0) = 0 convention.
double shannon_entropy(const ProbVector& p);

// L1 distance over the top-k index set of `a`, ties broken by lower index.
double manhattan_topk_distance(const Vec& a, const Vec& b, std::size_t k);

// Sum_i sigma(<h, z_i>) * z_i.
Vec similarity_weighted_retrieval(const Vec& h, const std::vector<Vec>& z,
                                  Activation activation);

// Top-k indices of v by value, ties broken by lower index.
std::vector<std::size_t> topk_indices(const Vec& v, std::size_t k);

double dot(const Vec& a, const Vec& b);
std::size_t argmax(const Vec& v);
Vec matvec(const Vec& x, const Matrix& w);  // x (1 x rows) * w -> (1 x cols)
Vec add(const Vec& a, const Vec& b);
Vec scale(const Vec& a, double c);

}  // namespace inex
