#include "uigauge/kernels.hpp"

#include <cmath>
#include <limits>

#include "uigauge/error.hpp"

namespace uigauge {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) return 0;
  auto v = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return v < n ? v : n - 1;
}

namespace {

void check_square(const Matrix& M, const char* what) {
  if (M.rows != M.cols) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be square");
}

// Bandwidth search for one row; shared by both implementations because it
// is inherently sequential per row.
int calibrate_row(const double* d, std::size_t n, std::size_t i, double perplexity, double tol, int max_steps,
                  double* p, double& beta_out) {
  const double target = std::log(perplexity);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i && d[j] < dmin) dmin = d[j];
  }
  double beta = 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  int step = 0;
  for (; step < max_steps; ++step) {
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        p[j] = 0.0;
        continue;
      }
      double shifted = d[j] - dmin;
      p[j] = std::exp(-beta * shifted);
      sum += p[j];
      weighted += shifted * p[j];
    }
    double entropy = std::log(sum) + beta * weighted / sum;
    double diff = entropy - target;
    if (std::abs(diff) < tol) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
    } else {
      hi = beta;
      beta = (beta + lo) / 2.0;
    }
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p[j] = j == i ? 0.0 : std::exp(-beta * (d[j] - dmin));
    sum += p[j];
  }
  for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
  beta_out = beta;
  return step;
}

}  // namespace

Matrix squared_distances(const Matrix& X) {
  const std::size_t n = X.rows, d = X.cols;
  Matrix D(n, n);
#pragma omp parallel for schedule(static)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    auto i = static_cast<std::size_t>(li);
    const double* xi = X.row(i);
    double* out = D.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double* xj = X.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double t = xi[k] - xj[k];
        s += t * t;
      }
      out[j] = s;
    }
  }
  return D;
}

Affinities calibrate_affinities(const Matrix& D, double perplexity, double tol, int max_steps) {
  check_square(D, "distance matrix");
  const std::size_t n = D.rows;
  Affinities a{Matrix(n, n), std::vector<double>(n), std::vector<int>(n)};
#pragma omp parallel for schedule(dynamic, 8)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    auto i = static_cast<std::size_t>(li);
    a.steps[i] = calibrate_row(D.row(i), n, i, perplexity, tol, max_steps, a.conditional.row(i), a.beta[i]);
  }
  return a;
}

double tsne_kl_gradient(const Matrix& P, const Matrix& Y, double exaggeration, Matrix& grad) {
  check_square(P, "P");
  const std::size_t n = Y.rows, dim = Y.cols;
  grad = Matrix(n, dim);
  Matrix num(n, n);
  std::vector<double> row_z(n, 0.0);
#pragma omp parallel for schedule(static)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    auto i = static_cast<std::size_t>(li);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        double t = Y.at(i, k) - Y.at(j, k);
        s += t * t;
      }
      double q = 1.0 / (1.0 + s);
      num.at(i, j) = q;
      z += q;
    }
    row_z[i] = z;
  }
  double z = 0.0;
  for (double r : row_z) z += r;

  std::vector<double> row_kl(n, 0.0);
#pragma omp parallel for schedule(static)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    auto i = static_cast<std::size_t>(li);
    double kl = 0.0;
    double* g = grad.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double q = num.at(i, j) / z;
      double p = P.at(i, j);
      if (p > 0) kl += p * std::log(p / q);
      double coeff = 4.0 * (exaggeration * p - q) * num.at(i, j);
      for (std::size_t k = 0; k < dim; ++k) g[k] += coeff * (Y.at(i, k) - Y.at(j, k));
    }
    row_kl[i] = kl;
  }
  double kl = 0.0;
  for (double r : row_kl) kl += r;
  return kl;
}

void assign_nearest(const Matrix& X, const Matrix& C, std::vector<int>& labels, std::vector<double>& dist2) {
  if (X.cols != C.cols) throw Error(ErrorCode::DimensionMismatch, "centroid dimension differs from data");
  const std::size_t n = X.rows, k = C.rows, d = X.cols;
  labels.assign(n, 0);
  dist2.assign(n, 0.0);
#pragma omp parallel for schedule(static)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    auto i = static_cast<std::size_t>(li);
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        double diff = X.at(i, t) - C.at(c, t);
        s += diff * diff;
      }
      if (s < best) {
        best = s;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
    dist2[i] = best;
  }
}

namespace serial {

Matrix squared_distances(const Matrix& X) {
  Matrix D(X.rows, X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < X.cols; ++k) s += (X.at(i, k) - X.at(j, k)) * (X.at(i, k) - X.at(j, k));
      D.at(i, j) = s;
    }
  }
  return D;
}

Affinities calibrate_affinities(const Matrix& D, double perplexity, double tol, int max_steps) {
  check_square(D, "distance matrix");
  const std::size_t n = D.rows;
  Affinities a{Matrix(n, n), std::vector<double>(n), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    a.steps[i] = calibrate_row(D.row(i), n, i, perplexity, tol, max_steps, a.conditional.row(i), a.beta[i]);
  }
  return a;
}

double tsne_kl_gradient(const Matrix& P, const Matrix& Y, double exaggeration, Matrix& grad) {
  check_square(P, "P");
  const std::size_t n = Y.rows, dim = Y.cols;
  auto student = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += (Y.at(i, k) - Y.at(j, k)) * (Y.at(i, k) - Y.at(j, k));
    return 1.0 / (1.0 + s);
  };
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) z += student(i, j);
    }
  }
  grad = Matrix(n, dim);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double w = student(i, j);
      double q = w / z;
      if (P.at(i, j) > 0) kl += P.at(i, j) * std::log(P.at(i, j) / q);
      for (std::size_t k = 0; k < dim; ++k) {
        grad.at(i, k) += 4.0 * (exaggeration * P.at(i, j) - q) * w * (Y.at(i, k) - Y.at(j, k));
      }
    }
  }
  return kl;
}

void assign_nearest(const Matrix& X, const Matrix& C, std::vector<int>& labels, std::vector<double>& dist2) {
  if (X.cols != C.cols) throw Error(ErrorCode::DimensionMismatch, "centroid dimension differs from data");
  labels.assign(X.rows, 0);
  dist2.assign(X.rows, 0.0);
  for (std::size_t i = 0; i < X.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C.rows; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < X.cols; ++t) s += (X.at(i, t) - C.at(c, t)) * (X.at(i, t) - C.at(c, t));
      if (s < best) {
        best = s;
        labels[i] = static_cast<int>(c);
      }
    }
    dist2[i] = best;
  }
}

}  // namespace serial

}  // namespace uigauge
