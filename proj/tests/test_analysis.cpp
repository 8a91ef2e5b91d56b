#include <doctest.h>

#include <regex>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "uigauge/analysis.hpp"
#include "uigauge/error.hpp"

using namespace uigauge;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

double max_rel_err(const Matrix& a, const Matrix& b) {
  double scale = 0, err = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    scale = std::max(scale, std::abs(b.data[i]));
    err = std::max(err, std::abs(a.data[i] - b.data[i]));
  }
  return err / scale;
}

class EchoFirst : public TextModel {
 public:
  std::string generate(const GenerateRequest& r) override {
    auto pos = r.prompt.find("\n- ");
    auto end = r.prompt.find('\n', pos + 3);
    return r.prompt.substr(pos + 3, end - pos - 3);
  }
  std::string model_id() const override { return "echo"; }
};

class Broken : public TextModel {
 public:
  std::string generate(const GenerateRequest&) override { throw Error(ErrorCode::Timeout, "slow"); }
  std::string model_id() const override { return "broken"; }
};

}  // namespace

TEST_CASE("parallel kernels agree with the serial references") {
  Matrix X = random_matrix(57, 6, 1);
  Matrix D = squared_distances(X);
  Matrix Ds = serial::squared_distances(X);
  CHECK(D.data == Ds.data);

  auto A = calibrate_affinities(D, 10.0);
  auto As = serial::calibrate_affinities(Ds, 10.0);
  CHECK(A.conditional.data == As.conditional.data);
  CHECK(A.beta == As.beta);

  Matrix P = joint_probabilities(X, 10.0);
  Matrix Y = random_matrix(57, 2, 2);
  Matrix g(57, 2), gs(57, 2);
  double kl = tsne_kl_gradient(P, Y, 4.0, g);
  double kls = serial::tsne_kl_gradient(P, Y, 4.0, gs);
  CHECK(kl == doctest::Approx(kls).epsilon(1e-12));
  CHECK(max_rel_err(g, gs) < 1e-12);

  Matrix C = random_matrix(5, 6, 3);
  std::vector<int> l, ls;
  std::vector<double> d2, d2s;
  assign_nearest(X, C, l, d2);
  serial::assign_nearest(X, C, ls, d2s);
  CHECK(l == ls);
  CHECK(d2 == d2s);
}

TEST_CASE("calibrated rows reach the requested perplexity") {
  Matrix X = random_matrix(40, 3, 9);
  auto A = calibrate_affinities(squared_distances(X), 8.0);
  for (std::size_t i = 0; i < 40; ++i) {
    double sum = 0, h = 0;
    for (std::size_t j = 0; j < 40; ++j) {
      double p = A.conditional.at(i, j);
      sum += p;
      if (p > 0) h -= p * std::log(p);
    }
    CHECK(A.conditional.at(i, i) == 0.0);
    CHECK(sum == doctest::Approx(1.0));
    CHECK(std::exp(h) == doctest::Approx(8.0).epsilon(1e-3));
  }
}

TEST_CASE("joint probabilities are symmetric and sum to one") {
  Matrix P = joint_probabilities(random_matrix(20, 4, 5), 5.0);
  double sum = 0;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(P.at(i, j) == P.at(j, i));
      sum += P.at(i, j);
    }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("KL gradient matches central finite differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Matrix X = random_matrix(10, 4, seed);
    Matrix P = joint_probabilities(X, 3.0);
    Matrix Y = random_matrix(10, 2, seed + 100);
    Matrix g(10, 2);
    double kl = tsne_kl_gradient(P, Y, 1.0, g);
    CHECK(kl == doctest::Approx(testsupport::naive_kl(P, Y)).epsilon(1e-10));
    CHECK(max_rel_err(g, testsupport::finite_difference_gradient(P, Y)) < 1e-4);
  }
}

TEST_CASE("k-means basic cases") {
  Rng rng(4);
  Matrix X(90, 3);
  std::vector<int> truth(90);
  const double centers[3][3] = {{0, 0, 0}, {50, 0, 0}, {0, 50, 50}};
  for (std::size_t i = 0; i < 90; ++i) {
    truth[i] = static_cast<int>(i % 3);
    for (std::size_t c = 0; c < 3; ++c) X.at(i, c) = centers[truth[i]][c] + rng.normal();
  }
  KMeansOptions o;
  o.k = 3;
  auto m = kmeans(X, o);
  // Same partition as the true blobs, up to relabeling.
  std::map<int, int> relabel;
  for (std::size_t i = 0; i < 90; ++i) {
    auto [it, fresh] = relabel.emplace(m.assignment[i], truth[i]);
    CHECK(it->second == truth[i]);
  }
  CHECK(relabel.size() == 3);

  o.k = 1;
  auto one = kmeans(X, o);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0;
    for (std::size_t i = 0; i < 90; ++i) mean += X.at(i, c);
    CHECK(one.centroids.at(0, c) == doctest::Approx(mean / 90));
  }

  Matrix dup(6, 2, 1.5);
  o.k = 2;
  auto d = kmeans(dup, o);
  CHECK(d.inertia == 0.0);

  o.k = 7;
  CHECK_THROWS_AS(kmeans(dup, o), Error);
}

TEST_CASE("k-means inertia never increases and assignments are nearest (property)") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng pick(seed);
    std::size_t n = 20 + pick.below(80), d = 1 + pick.below(6);
    Matrix X = random_matrix(n, d, seed * 7 + 1);
    KMeansOptions o;
    o.k = 1 + static_cast<int>(pick.below(8));
    o.seed = seed;
    auto m = kmeans(X, o);
    for (std::size_t i = 1; i < m.inertia_history.size(); ++i) CHECK(m.inertia_history[i] <= m.inertia_history[i - 1]);
    for (std::size_t i = 0; i < n; ++i) {
      auto dist = [&](std::size_t c) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += (X.at(i, j) - m.centroids.at(c, j)) * (X.at(i, j) - m.centroids.at(c, j));
        return s;
      };
      double mine = dist(static_cast<std::size_t>(m.assignment[i]));
      for (std::size_t c = 0; c < m.centroids.rows; ++c) CHECK(mine <= dist(c));
    }
  }
}

TEST_CASE("k-means is deterministic under a seed") {
  Matrix X = random_matrix(60, 4, 8);
  KMeansOptions o;
  o.k = 4;
  o.seed = 99;
  CHECK(kmeans(X, o).assignment == kmeans(X, o).assignment);
}

TEST_CASE("t-SNE separates two blobs") {
  std::vector<int> group;
  Matrix X = testsupport::two_blobs(100, 16, 5, group);
  TsneOptions o;
  o.seed = 5;
  auto layout = tsne(X, o);
  CHECK(layout.coords.rows == 100);
  CHECK(testsupport::neighbor_purity(layout.coords, group) >= 0.9);
  CHECK(layout.kl >= 0);
  // KL after early exaggeration does not grow by more than the tolerance band.
  const auto& h = layout.kl_history;
  REQUIRE(h.size() == 1000);
  CHECK(h.back() <= h[249] + 1e-6);
  for (std::size_t i = 500; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-6);

  auto again = tsne(X, o);
  CHECK(again.coords.data == layout.coords.data);
}

TEST_CASE("t-SNE degenerate inputs") {
  Matrix same(5, 3, 2.0);
  TsneOptions o;
  o.iterations = 100;
  auto layout = tsne(same, o);
  for (double v : layout.coords.data) CHECK(std::isfinite(v));
  CHECK(std::isfinite(layout.kl));
  CHECK(layout.perplexity < 30.0);
  CHECK_FALSE(layout.notes.empty());
  CHECK_THROWS_AS(tsne(Matrix(4, 3, 1.0), o), Error);
}

TEST_CASE("heatmap examples") {
  Matrix L(4, 2);
  const double pts[4][2] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
  for (std::size_t i = 0; i < 4; ++i) L.at(i, 0) = pts[i][0], L.at(i, 1) = pts[i][1];
  auto g = failure_heatmap(L, {true, false, true, false}, 2);
  CHECK(g.cell(0, 0).rate() == 1.0);
  CHECK(g.cell(1, 0).rate() == 0.0);
  CHECK(g.cell(0, 1).rate() == 1.0);
  CHECK(g.cell(1, 1).rate() == 0.0);

  auto ok = failure_heatmap(L, {false, false, false, false}, 3);
  auto bad = failure_heatmap(L, {true, true, true, true}, 3);
  for (std::size_t c = 0; c < ok.cells.size(); ++c) {
    if (ok.cells[c].count) CHECK(ok.cells[c].rate() == 0.0);
    if (bad.cells[c].count) CHECK(bad.cells[c].rate() == 1.0);
  }
  CHECK_THROWS_AS(failure_heatmap(L, {true}, 2), Error);
}

TEST_CASE("heatmap conserves counts and failures (property)") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = rng.below(300);
    Matrix L(n, 2);
    for (auto& v : L.data) v = rng.normal() * 10;
    std::vector<bool> failed(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) total += (failed[i] = rng.uniform() < 0.3);
    auto g = failure_heatmap(L, failed, 1 + static_cast<int>(rng.below(60)));
    std::size_t count = 0, fails = 0;
    for (const auto& c : g.cells) count += c.count, fails += c.failures;
    CHECK(count == n);
    CHECK(fails == total);
  }
}

TEST_CASE("cluster labels") {
  Matrix X = random_matrix(40, 3, 2);
  KMeansOptions o;
  o.k = 8;
  auto m = kmeans(X, o);
  std::vector<std::string> utt;
  for (int i = 0; i < 40; ++i) utt.push_back("Open menu number " + std::to_string(i) + " and keep the settings page visible for now");
  auto offline = label_clusters(m, utt, nullptr);
  CHECK(offline.size() == 8);
  CHECK(offline.at(0) == "cluster-0");
  CHECK(offline.at(7) == "cluster-7");

  EchoFirst echo;
  auto named = label_clusters(m, utt, &echo, 10, 1);
  CHECK(named.size() == 8);
  for (const auto& [c, name] : named) {
    CHECK(name.size() <= 40);
    CHECK(name.rfind("Open menu number", 0) == 0);
  }

  Broken broken;
  std::vector<std::string> notes;
  auto fallback = label_clusters(m, utt, &broken, 10, 1, &notes);
  CHECK(fallback.at(3) == "cluster-3");
  CHECK(notes.size() == 8);
}

TEST_CASE("label sanitizing") {
  CHECK(sanitize_label("\n  \"Media controls.\"  \nmore") == "Media controls");
  CHECK(sanitize_label("**Climate   settings**") == "Climate settings");
  std::string umlauts(30, 'a');
  umlauts += "ääääääää";  // two bytes each, crosses the 40-byte limit mid-character
  auto cut = sanitize_label(umlauts);
  CHECK(cut.size() <= 40);
  CHECK(cut.size() == 40);
  CHECK(sanitize_label("") == "");
}

TEST_CASE("plot SVG: deterministic, one glyph per point, opacity follows the failure rate") {
  Rng rng(21);
  Matrix L(120, 2);
  for (auto& v : L.data) v = rng.normal();
  std::vector<bool> failed(120);
  for (std::size_t i = 0; i < 120; ++i) failed[i] = rng.uniform() < 0.4;
  auto grid = failure_heatmap(L, failed, 8);
  std::vector<int> clusters(120);
  for (std::size_t i = 0; i < 120; ++i) clusters[i] = static_cast<int>(i % 5);
  std::map<int, std::string> labels{{0, "a & b"}, {1, "b"}, {2, "c"}, {3, "d"}, {4, "<e>"}};
  PlotInput in{&L, &clusters, &labels, &grid, "failures"};
  auto svg = render_plot_svg(in);
  CHECK(svg == render_plot_svg(in));
  CHECK(svg.find("a &amp; b") != std::string::npos);
  CHECK(svg.find("&lt;e&gt;") != std::string::npos);

  auto points = svg.substr(svg.find("<g class=\"points\">"));
  points = points.substr(0, points.find("</g>"));
  std::size_t glyphs = 0;
  for (auto p = points.find("class=\"pt\""); p != std::string::npos; p = points.find("class=\"pt\"", p + 1)) ++glyphs;
  CHECK(glyphs == 120);

  std::regex cell_re(R"re(data-ix="(\d+)" data-iy="(\d+)" data-count="(\d+)" data-failures="(\d+)"[^>]*fill-opacity="([0-9.]+)")re");
  std::size_t cells = 0, counted = 0;
  for (std::sregex_iterator it(svg.begin(), svg.end(), cell_re), end; it != end; ++it) {
    int ix = std::stoi((*it)[1]), iy = std::stoi((*it)[2]);
    std::size_t count = std::stoul((*it)[3]), fails = std::stoul((*it)[4]);
    double opacity = std::stod((*it)[5]);
    CHECK(grid.cell(ix, iy).count == count);
    CHECK(grid.cell(ix, iy).failures == fails);
    CHECK(opacity == doctest::Approx(0.6 * static_cast<double>(fails) / static_cast<double>(count)).epsilon(1e-6));
    ++cells;
    counted += count;
  }
  CHECK(cells > 0);
  CHECK(counted == 120);

  Matrix single(1, 2, 0.0);
  FailureGrid empty_grid;
  auto tiny = render_plot_svg(PlotInput{&single, nullptr, nullptr, &empty_grid, ""});
  CHECK(tiny.find("class=\"pt\"") != std::string::npos);
  CHECK(tiny.find("class=\"cell\"") == std::string::npos);
}

TEST_CASE("embeddings files round-trip and reject bad rows") {
  testsupport::TempDir dir;
  auto m = EmbeddingMatrix::from_rows({"a", "b"}, {{1.0, 2.5}, {-3.0, 0.125}});
  write_embeddings(m, dir / "e.jsonl");
  auto back = load_embeddings(dir / "e.jsonl");
  CHECK(back.ids == m.ids);
  CHECK(back.values.data == m.values.data);
  CHECK_THROWS_AS(EmbeddingMatrix::from_rows({"a", "b"}, {{1.0}, {1.0, 2.0}}), Error);
  CHECK_THROWS_AS(EmbeddingMatrix::from_rows({"a"}, {{std::nan("")}}), Error);
}
