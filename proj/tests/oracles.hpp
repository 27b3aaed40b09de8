#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

// Reference implementations written independently of the library.
namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(Matrix a) {
  const std::size_t n = a.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (a[p][c] == 0.0) return 0.0;
    if (p != c) {
      std::swap(a[p], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

// Solves a x = b by Gauss-Jordan elimination.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

inline Matrix submatrix(const Matrix& a, const std::vector<std::size_t>& idx) {
  Matrix s(idx.size(), std::vector<double>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) s[i][j] = a[idx[i]][idx[j]];
  return s;
}

inline double exponential_variogram(double nugget, double sill, double range, double h) {
  return h == 0.0 ? 0.0 : nugget + sill * (1.0 - std::exp(-h / range));
}

// Matern correlation by direct numerical integration of
// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
inline double bessel_k(double nu, double x) {
  const double step = 1e-3;
  double sum = 0.5 * std::exp(-x);
  for (int i = 1; i < 40000; ++i) {
    const double t = i * step;
    const double term = std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
    sum += term;
    if (term < 1e-300) break;
  }
  return sum * step;
}

struct Pt {
  double x, y;
};

// Matheron semivariance over lags in [lo, hi) (or [lo, hi] when `closed`), by
// enumerating every ordered pair and halving.
inline std::pair<double, std::size_t> brute_semivariance(const std::vector<Pt>& pts,
                                                         const std::vector<double>& v, double lo,
                                                         double hi, bool closed = false) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      const double h = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
      if (!(h >= lo && (closed ? h <= hi : h < hi))) continue;
      sum += (v[i] - v[j]) * (v[i] - v[j]);
      ++count;
    }
  count /= 2;
  return {count ? sum / (4.0 * count) : 0.0, count};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("geocal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oracle
