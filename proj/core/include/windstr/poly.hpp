#pragma once

#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "windstr/errors.hpp"

namespace windstr {

// Roots of c[0] + c[1] z + ... + c[n] z^n via the companion matrix of the
// monic form. Leading zeros are trimmed; a constant polynomial has no roots.
inline std::vector<std::complex<double>> poly_roots(
    std::vector<std::complex<double>> c) {
  while (!c.empty() && std::abs(c.back()) == 0.0) c.pop_back();
  if (c.size() <= 1) return {};
  const int n = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[i] / c[n];
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
  if (es.info() != Eigen::Success)
    throw NumericError("poly_roots: eigensolver failed");
  std::vector<std::complex<double>> out(n);
  for (int i = 0; i < n; ++i) out[i] = es.eigenvalues()(i);
  return out;
}

// Convolution product of two coefficient vectors (ascending powers).
inline std::vector<std::complex<double>> poly_mul(
    const std::vector<std::complex<double>>& p,
    const std::vector<std::complex<double>>& q) {
  std::vector<std::complex<double>> out(p.size() + q.size() - 1, 0.0);
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
  return out;
}

// Monic polynomial with the given roots (ascending powers).
inline std::vector<std::complex<double>> poly_from_roots(
    const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> out{1.0};
  for (const auto& r : roots) out = poly_mul(out, {-r, 1.0});
  return out;
}

}  // namespace windstr
