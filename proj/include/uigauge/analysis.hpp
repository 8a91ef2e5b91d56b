#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uigauge/inference.hpp"
#include "uigauge/kernels.hpp"

namespace uigauge {

/// n x d embeddings with the annotation id of every row.
struct EmbeddingMatrix {
  Matrix values;
  std::vector<std::string> ids;

  /// Throws DimensionMismatch for ragged rows and DegenerateInput for NaN/Inf.
  static EmbeddingMatrix from_rows(std::vector<std::string> ids, const std::vector<std::vector<double>>& rows);
};

/// JSONL rows {"id": ..., "embedding": [...]}.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);

struct KMeansOptions {
  int k = 8;
  std::uint64_t seed = 0;
  int max_iters = 300;
  double tol = 1e-6;  // stop when the largest centroid shift is below this
};

struct ClusterModel {
  Matrix centroids;
  std::vector<int> assignment;
  double inertia = 0;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;
  std::size_t empty_cluster_reseeds = 0;
};

/// k-means++ seeding and Lloyd iterations. DegenerateInput when n < k or k < 1.
ClusterModel kmeans(const Matrix& X, const KMeansOptions& options = {});

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  std::optional<double> learning_rate;  // default n / 12
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 0;
};

struct TsneLayout {
  Matrix coords;  // n x 2
  double kl = 0;
  int iterations = 0;
  std::uint64_t seed = 0;
  double perplexity = 0;  // after clamping
  std::vector<double> kl_history;
  std::vector<std::string> notes;
};

/// Joint probabilities: P = (P_cond + P_cond^T) / (2n), off-diagonal floor 1e-12.
Matrix joint_probabilities(const Matrix& X, double perplexity);

/// Exact t-SNE. DegenerateInput when n < 5; perplexity is clamped to n/3.
TsneLayout tsne(const Matrix& X, const TsneOptions& options = {});

struct FailureCell {
  std::size_t count = 0;
  std::size_t failures = 0;
  std::optional<double> rate() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(failures) / static_cast<double>(count);
  }
};

struct FailureGrid {
  int size = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // layout bounding box
  std::vector<FailureCell> cells;          // row-major, row = y cell

  const FailureCell& cell(int ix, int iy) const { return cells[static_cast<std::size_t>(iy * size + ix)]; }
  /// Cell containing a layout point; the maximum edge belongs to the last cell.
  std::pair<int, int> cell_of(double x, double y) const;
};

/// `failed[i]` marks row i as a failure. Empty layouts give an all-empty grid.
FailureGrid failure_heatmap(const Matrix& layout, const std::vector<bool>& failed, int grid_size = 50);

/// Offline (llm == nullptr) names are "cluster-i". Per-cluster backend errors
/// fall back to the placeholder and are reported in `notes`.
std::map<int, std::string> label_clusters(const ClusterModel& model, const std::vector<std::string>& utterances,
                                          TextModel* llm, int samples_per_cluster = 10, std::uint64_t seed = 0,
                                          std::vector<std::string>* notes = nullptr);

/// First non-empty line, quotes and markup removed, at most 40 bytes on a UTF-8 boundary.
std::string sanitize_label(std::string_view text);

struct PlotInput {
  const Matrix* layout = nullptr;                 // n x 2
  const std::vector<int>* clusters = nullptr;     // optional
  const std::map<int, std::string>* labels = nullptr;
  const FailureGrid* grid = nullptr;              // optional
  std::string title;
};

/// Deterministic SVG: heatmap cells as red rectangles with fill-opacity = 0.6 * rate,
/// one glyph per point by cluster, legend with cluster labels.
std::string render_plot_svg(const PlotInput& input);
/// Legend-only figure listing cluster glyphs, labels and sizes.
std::string render_cluster_legend_svg(const std::vector<int>& clusters, const std::map<int, std::string>& labels);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace uigauge
