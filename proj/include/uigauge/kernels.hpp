#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace uigauge {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Result of per-row Gaussian bandwidth calibration.
struct Affinities {
  Matrix conditional;         // p_{j|i}, rows sum to 1, zero diagonal
  std::vector<double> beta;   // precision 1/(2 sigma_i^2) per row
  std::vector<int> steps;     // bisection steps used per row
};

// OpenMP kernels. Every row is computed independently and reductions are done
// over per-row partials in row order, so results do not depend on the thread count.

/// D[i][j] = ||x_i - x_j||^2.
Matrix squared_distances(const Matrix& X);

/// Bisection on beta per row until |H_i - log(perplexity)| < tol (natural log).
Affinities calibrate_affinities(const Matrix& D, double perplexity, double tol = 1e-5, int max_steps = 200);

/// KL(P || Q) for the Student-t similarities of layout Y, and its gradient
/// dC/dy_i = 4 * sum_j (exaggeration * p_ij - q_ij) (y_i - y_j) / (1 + ||y_i - y_j||^2).
/// The returned KL always uses the unexaggerated P.
double tsne_kl_gradient(const Matrix& P, const Matrix& Y, double exaggeration, Matrix& grad);

/// Index of the nearest centroid per row (ties: lowest index) and its squared distance.
void assign_nearest(const Matrix& X, const Matrix& centroids, std::vector<int>& labels, std::vector<double>& dist2);

namespace serial {

// Straightforward single-threaded reference versions, kept for testing and
// benchmarking the kernels above.
Matrix squared_distances(const Matrix& X);
Affinities calibrate_affinities(const Matrix& D, double perplexity, double tol = 1e-5, int max_steps = 200);
double tsne_kl_gradient(const Matrix& P, const Matrix& Y, double exaggeration, Matrix& grad);
void assign_nearest(const Matrix& X, const Matrix& centroids, std::vector<int>& labels, std::vector<double>& dist2);

}  // namespace serial

/// Portable deterministic sampling on top of std::mt19937_64, whose output
/// sequence is fixed by the standard (the std distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                  // [0, 1), 53 random bits
  double normal();                   // N(0, 1), Box-Muller
  std::size_t below(std::size_t n);  // [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

}  // namespace uigauge
