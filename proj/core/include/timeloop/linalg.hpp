#pragma once

#include <Eigen/Dense>

#include <vector>

namespace timeloop {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Christoffel symbols of the second kind, Gamma^a_{bc}, for an n-dimensional chart.
class Christoffel {
 public:
  explicit Christoffel(int n) : n_(n), data_(static_cast<std::size_t>(n * n * n), 0.0) {}

  int dim() const noexcept { return n_; }
  double& operator()(int a, int b, int c) { return data_[index(a, b, c)]; }
  double operator()(int a, int b, int c) const { return data_[index(a, b, c)]; }

  /// Gamma^a_{bc} u^b w^c.
  Vec contract(const Vec& u, const Vec& w) const {
    Vec out = Vec::Zero(n_);
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) {
        if (u[b] == 0.0) continue;
        for (int c = 0; c < n_; ++c) out[a] += data_[index(a, b, c)] * u[b] * w[c];
      }
    return out;
  }

 private:
  std::size_t index(int a, int b, int c) const {
    return static_cast<std::size_t>((a * n_ + b) * n_ + c);
  }
  int n_;
  std::vector<double> data_;
};

/// Partial derivatives d_d Gamma^a_{bc}, indexed (a, b, c, d).
class ChristoffelGradient {
 public:
  explicit ChristoffelGradient(int n)
      : n_(n), data_(static_cast<std::size_t>(n * n * n * n), 0.0) {}

  int dim() const noexcept { return n_; }
  double& operator()(int a, int b, int c, int d) { return data_[index(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const { return data_[index(a, b, c, d)]; }

 private:
  std::size_t index(int a, int b, int c, int d) const {
    return static_cast<std::size_t>(((a * n_ + b) * n_ + c) * n_ + d);
  }
  int n_;
  std::vector<double> data_;
};

}  // namespace timeloop
