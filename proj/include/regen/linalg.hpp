#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "regen/common.hpp"

namespace regen {

using Vec = std::vector<double>;

// Small dense row-major matrix. Everything here targets the d x d / tridiagonal
// matrices of this project (d a handful, birth-death generators a few hundred).
class Mat {
 public:
  Mat() : rows_(0), cols_(0) {}
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Mat diag(const Vec& d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static Mat outer(const Vec& a, const Vec& b) {
    Mat m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Mat transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Mat operator*(const Mat& o) const {
    Mat r(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
      }
    return r;
  }

  Vec operator*(const Vec& v) const {
    Vec r(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r[i] += (*this)(i, j) * v[j];
    return r;
  }

  Mat operator+(const Mat& o) const {
    Mat r = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += o.data_[i];
    return r;
  }

  Mat operator-(const Mat& o) const {
    Mat r = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= o.data_[i];
    return r;
  }

  Mat scaled(double s) const {
    Mat r = *this;
    for (double& x : r.data_) x *= s;
    return r;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).max_abs(); }

inline double sym_residual(const Mat& m) {
  double r = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) r = std::max(r, std::abs(m(i, j) - m(j, i)));
  return r;
}

struct EigenSym {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors
};

// Cyclic Jacobi eigensolver for symmetric matrices.
inline EigenSym eigen_sym(Mat a) {
  const std::size_t n = a.rows();
  Mat v = Mat::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-300) break;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    if (std::sqrt(off) <= 1e-15 * std::max(scale, 1e-300) * n) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  EigenSym out;
  out.values.resize(n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Vec diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return diag[i] < diag[j]; });
  out.vectors = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[idx[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, idx[j]);
  }
  return out;
}

// Symmetric PSD square root. Eigenvalues in [-tol*scale, 0) are clamped to 0;
// below that the matrix is rejected.
inline Mat psd_sqrt(const Mat& m, double tol = 1e-9) {
  const std::size_t n = m.rows();
  const double scale = std::max(m.max_abs(), 1e-300);
  if (sym_residual(m) > tol * scale)
    throw Error(ErrorCode::NonPSD, "matrix not symmetric within tolerance");
  Mat sym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sym(i, j) = 0.5 * (m(i, j) + m(j, i));
  EigenSym es = eigen_sym(sym);
  for (double& ev : es.values) {
    if (ev < -tol * scale) throw Error(ErrorCode::NonPSD, "negative eigenvalue beyond tolerance");
    ev = ev < 0.0 ? 0.0 : ev;
  }
  Mat r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += es.vectors(i, k) * std::sqrt(es.values[k]) * es.vectors(j, k);
      r(i, j) = acc;
    }
  // exact symmetry
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (r(i, j) + r(j, i));
      r(i, j) = r(j, i) = avg;
    }
  return r;
}

struct Svd {
  Mat u;      // rows x k
  Vec sigma;  // descending
  Mat v;      // cols x k
};

// One-sided Jacobi (Hestenes) SVD for small square matrices.
inline Svd svd(const Mat& a_in) {
  Mat a = a_in;  // columns get orthogonalized in place
  const std::size_t n = a.rows();
  Mat v = Mat::identity(a.cols());
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < a.cols(); ++p) {
      for (std::size_t q = p + 1; q < a.cols(); ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          app += a(i, p) * a(i, p);
          aqq += a(i, q) * a(i, q);
          apq += a(i, p) * a(i, q);
        }
        if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < a.cols(); ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    if (!rotated) break;
  }
  Svd out;
  const std::size_t k = a.cols();
  out.sigma.resize(k);
  out.u = Mat(n, k);
  std::vector<std::size_t> idx(k);
  Vec norms(k);
  for (std::size_t j = 0; j < k; ++j) {
    double nn = 0.0;
    for (std::size_t i = 0; i < n; ++i) nn += a(i, j) * a(i, j);
    norms[j] = std::sqrt(nn);
    idx[j] = j;
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });
  out.v = Mat(a.cols(), k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = idx[j];
    out.sigma[j] = norms[src];
    for (std::size_t i = 0; i < n; ++i)
      out.u(i, j) = norms[src] > 0.0 ? a(i, src) / norms[src] : 0.0;
    for (std::size_t i = 0; i < a.cols(); ++i) out.v(i, j) = v(i, src);
  }
  return out;
}

// Moore-Penrose pseudo-inverse; singular values below cutoff_rel * s_max are
// treated as zero.
inline Mat pseudo_inverse(const Mat& m, double cutoff_rel = 1e-12) {
  Svd s = svd(m);
  const double smax = s.sigma.empty() ? 0.0 : s.sigma[0];
  const double cutoff = cutoff_rel * smax;
  Mat r(m.cols(), m.rows());
  for (std::size_t k = 0; k < s.sigma.size(); ++k) {
    if (s.sigma[k] <= cutoff || s.sigma[k] == 0.0) continue;
    const double inv = 1.0 / s.sigma[k];
    for (std::size_t i = 0; i < m.cols(); ++i)
      for (std::size_t j = 0; j < m.rows(); ++j) r(i, j) += s.v(i, k) * inv * s.u(j, k);
  }
  return r;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec vec_sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline double max_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace regen
