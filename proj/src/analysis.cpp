#include "uigauge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uigauge/error.hpp"
#include "uigauge/numfmt.hpp"

namespace uigauge {

using nlohmann::json;

EmbeddingMatrix EmbeddingMatrix::from_rows(std::vector<std::string> ids, const std::vector<std::vector<double>>& rows) {
  if (ids.size() != rows.size()) throw Error(ErrorCode::DimensionMismatch, "ids and rows differ in length");
  EmbeddingMatrix m;
  m.ids = std::move(ids);
  std::size_t d = rows.empty() ? 0 : rows.front().size();
  m.values = Matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "row '" + m.ids[i] + "' has dimension " + std::to_string(rows[i].size()) +
                                                    ", expected " + std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(rows[i][j])) throw Error(ErrorCode::DegenerateInput, "row '" + m.ids[i] + "' has a non-finite value");
      m.values.at(i, j) = rows[i][j];
    }
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      ids.push_back(j.at("id").get<std::string>());
      rows.push_back(j.at("embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return EmbeddingMatrix::from_rows(std::move(ids), rows);
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < m.values.rows; ++i) {
    std::vector<double> row(m.values.row(i), m.values.row(i) + m.values.cols);
    out << json{{"id", m.ids[i]}, {"embedding", row}}.dump() << '\n';
  }
  write_text_file(path, out.str());
}

// ---- k-means ----

namespace {

double total(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

Matrix kmeans_plus_plus(const Matrix& X, int k, Rng& rng) {
  const std::size_t n = X.rows, d = X.cols;
  Matrix C(static_cast<std::size_t>(k), d);
  std::size_t first = rng.below(n);
  std::copy(X.row(first), X.row(first) + d, C.row(0));
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    const double* prev = C.row(static_cast<std::size_t>(c - 1));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += (X.at(i, t) - prev[t]) * (X.at(i, t) - prev[t]);
      best[i] = std::min(best[i], s);
    }
    double sum = total(best);
    std::size_t pick = n - 1;
    if (sum > 0) {
      double r = rng.uniform() * sum;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    std::copy(X.row(pick), X.row(pick) + d, C.row(static_cast<std::size_t>(c)));
  }
  return C;
}

}  // namespace

ClusterModel kmeans(const Matrix& X, const KMeansOptions& options) {
  const std::size_t n = X.rows, d = X.cols;
  if (options.k < 1) throw Error(ErrorCode::DegenerateInput, "k must be >= 1");
  const auto k = static_cast<std::size_t>(options.k);
  if (n < k) {
    throw Error(ErrorCode::DegenerateInput, "k-means needs at least k rows (n=" + std::to_string(n) +
                                                ", k=" + std::to_string(k) + ")");
  }
  Rng rng(options.seed);
  ClusterModel m;
  Matrix C = kmeans_plus_plus(X, options.k, rng);
  std::vector<int> labels;
  std::vector<double> d2;
  assign_nearest(X, C, labels, d2);
  double inertia = total(d2);
  m.inertia_history.push_back(inertia);

  for (int it = 1; it <= options.max_iters; ++it) {
    Matrix next(k, d);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(labels[i]);
      ++sizes[c];
      for (std::size_t t = 0; t < d; ++t) next.at(c, t) += X.at(i, t);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t t = 0; t < d; ++t) next.at(c, t) /= static_cast<double>(sizes[c]);
    }
    // Re-seed each empty cluster with the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
        if (far == n || d2[i] > d2[far]) far = i;
      }
      if (far == n) far = 0;
      --sizes[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      sizes[c] = 1;
      d2[far] = 0.0;
      std::copy(X.row(far), X.row(far) + d, next.row(c));
      ++m.empty_cluster_reseeds;
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += (next.at(c, t) - C.at(c, t)) * (next.at(c, t) - C.at(c, t));
      shift = std::max(shift, std::sqrt(s));
    }
    std::vector<int> next_labels;
    std::vector<double> next_d2;
    assign_nearest(X, next, next_labels, next_d2);
    double next_inertia = total(next_d2);
    // Guard against a rounding-level increase once converged.
    if (next_inertia > inertia) break;
    C = std::move(next);
    labels = std::move(next_labels);
    d2 = std::move(next_d2);
    inertia = next_inertia;
    m.inertia_history.push_back(inertia);
    m.iterations = it;
    if (shift < options.tol) break;
  }
  m.centroids = std::move(C);
  m.assignment = std::move(labels);
  m.inertia = inertia;
  return m;
}

// ---- t-SNE ----

Matrix joint_probabilities(const Matrix& X, double perplexity) {
  const std::size_t n = X.rows;
  Affinities a = calibrate_affinities(squared_distances(X), perplexity);
  Matrix P(n, n);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      P.at(i, j) = std::max((a.conditional.at(i, j) + a.conditional.at(j, i)) / denom, 1e-12);
    }
  }
  return P;
}

TsneLayout tsne(const Matrix& X, const TsneOptions& options) {
  const std::size_t n = X.rows, d = X.cols;
  if (n < 5) throw Error(ErrorCode::DegenerateInput, "t-SNE needs at least 5 rows, got " + std::to_string(n));
  TsneLayout layout;
  layout.seed = options.seed;
  layout.perplexity = options.perplexity;
  if (static_cast<double>(n) < 3.0 * options.perplexity) {
    layout.perplexity = static_cast<double>(n) / 3.0;
    layout.notes.push_back("perplexity clamped from " + format_fixed(options.perplexity, 2) + " to " +
                           format_fixed(layout.perplexity, 2) + " for n=" + std::to_string(n));
  }

  Matrix Xn = X;
  double max_abs = 0.0;
  for (std::size_t t = 0; t < d; ++t) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += Xn.at(i, t);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      Xn.at(i, t) -= mean;
      max_abs = std::max(max_abs, std::abs(Xn.at(i, t)));
    }
  }
  if (max_abs > 0) {
    for (double& v : Xn.data) v /= max_abs;
  }
  Matrix P = joint_probabilities(Xn, layout.perplexity);

  Rng rng(options.seed);
  Matrix Y(n, 2);
  for (double& v : Y.data) v = 1e-4 * rng.normal();
  Matrix update(n, 2), gains(n, 2, 1.0), grad;
  const double lr = options.learning_rate.value_or(static_cast<double>(n) / 12.0);

  for (int it = 0; it < options.iterations; ++it) {
    double exaggeration = it < options.exaggeration_iters ? options.early_exaggeration : 1.0;
    double momentum = it < options.momentum_switch ? options.momentum_initial : options.momentum_final;
    layout.kl_history.push_back(tsne_kl_gradient(P, Y, exaggeration, grad));
    for (std::size_t i = 0; i < Y.data.size(); ++i) {
      bool same_sign = (grad.data[i] > 0) == (update.data[i] > 0);
      gains.data[i] = std::max(0.01, same_sign ? gains.data[i] * 0.8 : gains.data[i] + 0.2);
      update.data[i] = momentum * update.data[i] - lr * gains.data[i] * grad.data[i];
      Y.data[i] += update.data[i];
    }
    for (std::size_t t = 0; t < 2; ++t) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += Y.at(i, t);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) Y.at(i, t) -= mean;
    }
  }
  layout.kl = tsne_kl_gradient(P, Y, 1.0, grad);
  layout.iterations = options.iterations;
  layout.coords = std::move(Y);
  for (double v : layout.coords.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "t-SNE diverged to a non-finite layout");
  }
  return layout;
}

// ---- heatmap ----

std::pair<int, int> FailureGrid::cell_of(double x, double y) const {
  auto index = [&](double v, double lo, double hi) {
    if (!(hi > lo)) return 0;
    int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * size));
    return std::clamp(i, 0, size - 1);
  };
  return {index(x, x0, x1), index(y, y0, y1)};
}

FailureGrid failure_heatmap(const Matrix& layout, const std::vector<bool>& failed, int grid_size) {
  if (grid_size < 1) throw Error(ErrorCode::DegenerateInput, "grid size must be >= 1");
  if (layout.cols != 2) throw Error(ErrorCode::DimensionMismatch, "layout must have two columns");
  if (failed.size() != layout.rows) throw Error(ErrorCode::DimensionMismatch, "one outcome per layout row is required");
  FailureGrid g;
  g.size = grid_size;
  g.cells.assign(static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size), {});
  if (layout.rows == 0) return g;
  g.x0 = g.x1 = layout.at(0, 0);
  g.y0 = g.y1 = layout.at(0, 1);
  for (std::size_t i = 1; i < layout.rows; ++i) {
    g.x0 = std::min(g.x0, layout.at(i, 0));
    g.x1 = std::max(g.x1, layout.at(i, 0));
    g.y0 = std::min(g.y0, layout.at(i, 1));
    g.y1 = std::max(g.y1, layout.at(i, 1));
  }
  for (std::size_t i = 0; i < layout.rows; ++i) {
    auto [ix, iy] = g.cell_of(layout.at(i, 0), layout.at(i, 1));
    auto& c = g.cells[static_cast<std::size_t>(iy * grid_size + ix)];
    ++c.count;
    c.failures += failed[i] ? 1 : 0;
  }
  return g;
}

// ---- cluster labels ----

std::string sanitize_label(std::string_view text) {
  std::string_view line;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(pos, end - pos);
    if (l.find_first_not_of(" \t\r\"'`*#_") != std::string_view::npos) {
      line = l;
      break;
    }
    pos = end + 1;
  }
  auto junk = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '"' || c == '\'' || c == '`' || c == '*' || c == '#' || c == '_' || c == '.'; };
  while (!line.empty() && junk(line.front())) line.remove_prefix(1);
  while (!line.empty() && junk(line.back())) line.remove_suffix(1);
  std::string out;
  bool space = false;
  for (char c : line) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  if (out.size() > 40) {
    std::size_t cut = 40;
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
    out.resize(cut);
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  return out;
}

std::map<int, std::string> label_clusters(const ClusterModel& model, const std::vector<std::string>& utterances,
                                          TextModel* llm, int samples_per_cluster, std::uint64_t seed,
                                          std::vector<std::string>* notes) {
  if (utterances.size() != model.assignment.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one utterance per clustered row is required");
  }
  std::map<int, std::string> names;
  const int k = static_cast<int>(model.centroids.rows);
  Rng rng(seed);
  for (int c = 0; c < k; ++c) {
    std::string fallback = "cluster-" + std::to_string(c);
    names[c] = fallback;
    if (!llm) continue;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < model.assignment.size(); ++i) {
      if (model.assignment[i] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng.below(i + 1)]);
    members.resize(std::min<std::size_t>(members.size(), static_cast<std::size_t>(std::max(1, samples_per_cluster))));
    std::string prompt =
        "Name the common theme of these UI test utterances in 2 to 4 words. Reply with the label only.\n";
    for (auto i : members) prompt += "- " + utterances[i] + "\n";
    try {
      std::string label = sanitize_label(llm->generate({nullptr, prompt, 0}));
      if (!label.empty()) names[c] = label;
    } catch (const Error& e) {
      if (notes) notes->push_back(fallback + ": " + e.what());
    }
  }
  return names;
}

// ---- plots ----

namespace {

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) { return format_fixed(v, 2); }

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Marker shape per cluster, cycling through eight shapes and nine colors.
std::string glyph(int cluster, double x, double y, double r) {
  const char* color = kPalette[static_cast<std::size_t>(cluster < 0 ? 0 : cluster) % 9];
  std::ostringstream s;
  int shape = (cluster < 0 ? 0 : cluster) % 8;
  auto poly = [&](std::initializer_list<std::pair<double, double>> pts) {
    s << "<polygon class=\"pt\" points=\"";
    bool first = true;
    for (auto [px, py] : pts) {
      s << (first ? "" : " ") << num(x + px * r) << ',' << num(y + py * r);
      first = false;
    }
    s << "\" fill=\"" << color << "\"/>";
  };
  switch (shape) {
    case 0: s << "<circle class=\"pt\" cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << color << "\"/>"; break;
    case 1: poly({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}); break;
    case 2: poly({{0, -1.2}, {1.1, 0.9}, {-1.1, 0.9}}); break;
    case 3: poly({{0, -1.3}, {1.3, 0}, {0, 1.3}, {-1.3, 0}}); break;
    case 4: poly({{0, 1.2}, {1.1, -0.9}, {-1.1, -0.9}}); break;
    case 5: poly({{-0.4, -1.2}, {0.4, -1.2}, {0.4, -0.4}, {1.2, -0.4}, {1.2, 0.4}, {0.4, 0.4}, {0.4, 1.2}, {-0.4, 1.2}, {-0.4, 0.4}, {-1.2, 0.4}, {-1.2, -0.4}, {-0.4, -0.4}}); break;
    case 6: poly({{1.2, 0}, {0.6, 1.04}, {-0.6, 1.04}, {-1.2, 0}, {-0.6, -1.04}, {0.6, -1.04}}); break;
    default: poly({{0, -1.3}, {0.38, -0.4}, {1.24, -0.4}, {0.55, 0.15}, {0.8, 1.05}, {0, 0.5}, {-0.8, 1.05}, {-0.55, 0.15}, {-1.24, -0.4}, {-0.38, -0.4}}); break;
  }
  return s.str();
}

void legend(std::ostringstream& svg, double x, double y, const std::vector<int>& clusters,
            const std::map<int, std::string>& labels) {
  std::map<int, std::size_t> sizes;
  for (int c : clusters) ++sizes[c];
  for (const auto& [c, _] : labels) sizes.try_emplace(c, 0);
  int row = 0;
  for (const auto& [c, count] : sizes) {
    auto it = labels.find(c);
    std::string name = it != labels.end() ? it->second : "cluster-" + std::to_string(c);
    double ry = y + row * 22;
    svg << glyph(c, x + 8, ry, 5) << "\n";
    svg << "<text x=\"" << num(x + 20) << "\" y=\"" << num(ry + 4) << "\" font-size=\"12\">" << escape_xml(name) << " ("
        << count << ")</text>\n";
    ++row;
  }
}

}  // namespace

std::string render_plot_svg(const PlotInput& in) {
  if (!in.layout || in.layout->cols != 2) throw Error(ErrorCode::DimensionMismatch, "plot needs an n x 2 layout");
  const Matrix& L = *in.layout;
  const double margin = 40, area = 720, legend_w = 260;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(2 * margin + area + legend_w) << "\" height=\""
      << num(2 * margin + area) << "\" font-family=\"sans-serif\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(margin) << "\" y=\"24\" font-size=\"16\">" << escape_xml(in.title) << "</text>\n";
  svg << "<rect x=\"" << num(margin) << "\" y=\"" << num(margin) << "\" width=\"" << num(area) << "\" height=\""
      << num(area) << "\" fill=\"none\" stroke=\"#999\"/>\n";

  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  if (in.grid && in.grid->size > 0 && L.rows > 0) {
    x0 = in.grid->x0, x1 = in.grid->x1, y0 = in.grid->y0, y1 = in.grid->y1;
  } else if (L.rows > 0) {
    x0 = x1 = L.at(0, 0);
    y0 = y1 = L.at(0, 1);
    for (std::size_t i = 1; i < L.rows; ++i) {
      x0 = std::min(x0, L.at(i, 0)), x1 = std::max(x1, L.at(i, 0));
      y0 = std::min(y0, L.at(i, 1)), y1 = std::max(y1, L.at(i, 1));
    }
  }
  auto sx = [&](double x) { return x1 > x0 ? margin + (x - x0) / (x1 - x0) * area : margin + area / 2; };
  auto sy = [&](double y) { return y1 > y0 ? margin + area - (y - y0) / (y1 - y0) * area : margin + area / 2; };

  if (in.grid && L.rows > 0) {
    const FailureGrid& g = *in.grid;
    double cw = area / g.size, ch = area / g.size;
    svg << "<g class=\"heatmap\">\n";
    for (int iy = 0; iy < g.size; ++iy) {
      for (int ix = 0; ix < g.size; ++ix) {
        const FailureCell& c = g.cell(ix, iy);
        auto rate = c.rate();
        if (!rate) continue;
        svg << "<rect class=\"cell\" data-ix=\"" << ix << "\" data-iy=\"" << iy << "\" data-count=\"" << c.count
            << "\" data-failures=\"" << c.failures << "\" x=\"" << num(margin + ix * cw) << "\" y=\""
            << num(margin + area - (iy + 1) * ch) << "\" width=\"" << num(cw) << "\" height=\"" << num(ch)
            << "\" fill=\"#ff0000\" fill-opacity=\"" << format_fixed(0.6 * *rate, 6) << "\"/>\n";
      }
    }
    svg << "</g>\n";
  }

  svg << "<g class=\"points\">\n";
  for (std::size_t i = 0; i < L.rows; ++i) {
    int c = in.clusters && i < in.clusters->size() ? (*in.clusters)[i] : 0;
    svg << glyph(c, sx(L.at(i, 0)), sy(L.at(i, 1)), 3) << "\n";
  }
  svg << "</g>\n";
  if (in.clusters && in.labels) {
    svg << "<g class=\"legend\">\n";
    legend(svg, 2 * margin + area, margin + 10, *in.clusters, *in.labels);
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_cluster_legend_svg(const std::vector<int>& clusters, const std::map<int, std::string>& labels) {
  std::set<int> keys(clusters.begin(), clusters.end());
  for (const auto& [c, _] : labels) keys.insert(c);
  double height = 50 + 22.0 * static_cast<double>(keys.size());
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"" << num(height)
      << "\" font-family=\"sans-serif\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"16\" y=\"24\" font-size=\"16\">Clusters</text>\n";
  legend(svg, 16, 48, clusters, labels);
  svg << "</svg>\n";
  return svg.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace uigauge
