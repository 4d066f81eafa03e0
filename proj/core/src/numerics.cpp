#include "inex/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace inex {

ProbVector::ProbVector(Vec v) : values(std::move(v)) {
  if (values.empty()) {
    throw std::invalid_argument("ProbVector: empty");
  }
  double sum = 0.0;
  for (double x : values) {
    if (!(x >= 0.0)) {
      throw std::invalid_argument("ProbVector: negative or NaN entry");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("ProbVector: entries do not sum to 1");
  }
}

ProbVector softmax(const Vec& v) {
  if (v.empty()) {
    throw std::invalid_argument("softmax: empty input");
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("softmax: non-finite input");
    }
  }
  const double m = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return ProbVector(std::move(out));
}

double shannon_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double x : p.values) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}

std::vector<std::size_t> topk_indices(const Vec& v, std::size_t k) {
  if (k == 0 || k > v.size()) {
    throw std::invalid_argument("topk_indices: k out of range");
  }
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(k);
  return idx;
}

double manhattan_topk_distance(const Vec& a, const Vec& b, std::size_t k) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("manhattan_topk_distance: length mismatch");
  }
  if (k == 0 || k > a.size()) {
    throw std::invalid_argument("manhattan_topk_distance: k out of range");
  }
  double d = 0.0;
  for (std::size_t i : topk_indices(a, k)) {
    d += std::abs(a[i] - b[i]);
  }
  return d;
}

Vec similarity_weighted_retrieval(const Vec& h, const std::vector<Vec>& z,
                                  Activation activation) {
  if (z.empty()) {
    throw std::invalid_argument("similarity_weighted_retrieval: empty Z");
  }
  Vec out(h.size(), 0.0);
  for (const Vec& zi : z) {
    if (zi.size() != h.size()) {
      throw std::invalid_argument(
          "similarity_weighted_retrieval: dimension mismatch");
    }
    const double s = dot(h, zi);
    double w = 0.0;
    switch (activation) {
      case Activation::Relu:
        w = s > 0.0 ? s : 0.0;
        break;
      case Activation::Silu:
        w = s / (1.0 + std::exp(-s));
        break;
    }
    for (std::size_t j = 0; j < h.size(); ++j) out[j] += w * zi[j];
  }
  return out;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::size_t argmax(const Vec& v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty");
  return static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
}

Vec matvec(const Vec& x, const Matrix& w) {
  if (x.size() != w.rows) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  Vec out(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double xr = x[r];
    const double* row = &w.data[r * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += xr * row[c];
  }
  return out;
}

Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add: length mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vec scale(const Vec& a, double c) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
  return out;
}

}  // namespace inex
