#pragma once

// Shared fixtures and independent oracles for the test binaries. Oracles
// here deliberately avoid the library's fast paths: ranking recomputes
// distances bit by bit, metrics follow their textbook definitions, and the
// numeric minimizer only ever evaluates the objective.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "edsh/model.hpp"

namespace testutil {

// ---- random builders -----------------------------------------------------

inline edsh::DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                       double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  edsh::DenseMatrix m(r, c);
  for (double& v : m.values) v = g(rng);
  return m;
}

inline edsh::DenseMatrix random_pm1(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::uniform_int_distribution<int> coin(0, 1);
  edsh::DenseMatrix m(r, c);
  for (double& v : m.values) v = coin(rng) ? 1.0 : -1.0;
  return m;
}

inline edsh::DenseMatrix random_onehot(std::mt19937_64& rng, std::size_t classes,
                                       std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  edsh::DenseMatrix m(classes, n);
  for (std::size_t j = 0; j < n; ++j) m(pick(rng), j) = 1.0;
  return m;
}

// Gaussian matrix pushed through Gram-Schmidt; retries the (measure-zero)
// collapse case.
inline edsh::DenseMatrix random_orthogonal(std::mt19937_64& rng, std::size_t n) {
  for (;;) {
    edsh::DenseMatrix a = random_matrix(rng, n, n);
    bool ok = true;
    for (std::size_t j = 0; j < n && ok; ++j) {
      for (std::size_t m = 0; m < j; ++m) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += a(i, j) * a(i, m);
        for (std::size_t i = 0; i < n; ++i) a(i, j) -= dot * a(i, m);
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += a(i, j) * a(i, j);
      if (s < 1e-12) {
        ok = false;
        break;
      }
      const double inv = 1.0 / std::sqrt(s);
      for (std::size_t i = 0; i < n; ++i) a(i, j) *= inv;
    }
    if (ok) return a;
  }
}

// Random model state plus matching data, for exercising single updates.
struct TinyInstance {
  edsh::Dataset ds;
  edsh::EdshModel m;
};

inline TinyInstance random_instance(std::mt19937_64& rng, std::size_t k, std::size_t n,
                                    std::size_t d1, std::size_t d2, std::size_t classes) {
  TinyInstance t;
  t.ds.x1 = random_matrix(rng, d1, n);
  t.ds.x2 = random_matrix(rng, d2, n);
  t.ds.labels = random_onehot(rng, classes, n);
  t.m.hyper.k = k;
  t.m.u1 = random_matrix(rng, d1, k);
  t.m.u2 = random_matrix(rng, d2, k);
  t.m.p = random_matrix(rng, classes, k);
  t.m.v = random_matrix(rng, k, n);
  t.m.r = random_orthogonal(rng, k);
  t.m.b = random_pm1(rng, k, n);
  t.m.w1 = random_matrix(rng, k, d1);
  t.m.w2 = random_matrix(rng, k, d2);
  t.m.centering.mean1.assign(d1, 0.0);
  t.m.centering.mean2.assign(d2, 0.0);
  return t;
}

// ---- dense oracles ---------------------------------------------------------

// Plain i, j, k triple loop; the reference summation order.
inline edsh::DenseMatrix naive_matmul(const edsh::DenseMatrix& a, const edsh::DenseMatrix& b) {
  edsh::DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const edsh::DenseMatrix& a, const edsh::DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

// ---- numeric minimization ---------------------------------------------------

template <class F>
std::vector<double> fd_gradient(const F& f, std::vector<double> x) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(x[i]));
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Steepest descent with finite-difference gradients and a three-point line
// search, which is exact for the quadratic subproblems it is used on.
template <class F>
std::vector<double> minimize(const F& f, std::vector<double> x, int max_iters = 5000,
                             double grad_tol = 1e-7) {
  const std::size_t n = x.size();
  std::vector<double> probe_x(n);
  auto probe = [&](const std::vector<double>& base, const std::vector<double>& dir,
                   double t) {
    for (std::size_t i = 0; i < n; ++i) probe_x[i] = base[i] + t * dir[i];
    return f(probe_x);
  };
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> g = fd_gradient(f, x);
    double gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (gnorm <= grad_tol) break;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] / gnorm;

    const double f0 = f(x);
    double span = 0.0;
    for (double v : x) span = std::max(span, std::abs(v));
    const double h = 1e-3 * (1.0 + span);
    const double curv = (probe(x, d, h) - 2.0 * f0 + probe(x, d, -h)) / (h * h);
    double step = curv > 0.0 ? gnorm / curv : h;
    double fnew = probe(x, d, step);
    for (int backoff = 0; fnew > f0 && backoff < 60; ++backoff) {
      step *= 0.5;
      fnew = probe(x, d, step);
    }
    if (fnew > f0) break;
    for (std::size_t i = 0; i < n; ++i) x[i] += step * d[i];
  }
  return x;
}

// ---- ranking and metric oracles ----------------------------------------------

// Bitwise distance between two +-1 code columns of a dense matrix.
inline std::size_t naive_hamming_cols(const edsh::DenseMatrix& a, std::size_t i,
                                      const edsh::DenseMatrix& b, std::size_t j) {
  std::size_t d = 0;
  for (std::size_t bit = 0; bit < a.rows; ++bit) d += a(bit, i) != b(bit, j);
  return d;
}

// Full ranking of database columns for query column qi: ascending distance,
// ties by ascending index (stable sort over an index list).
inline std::vector<std::size_t> naive_rank(const edsh::DenseMatrix& query_cols, std::size_t qi,
                                           const edsh::DenseMatrix& db_cols) {
  std::vector<std::size_t> dist(db_cols.cols), order(db_cols.cols);
  for (std::size_t j = 0; j < db_cols.cols; ++j)
    dist[j] = naive_hamming_cols(query_cols, qi, db_cols, j);
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return dist[x] < dist[y]; });
  return order;
}

inline double oracle_average_precision(const std::vector<std::size_t>& ranking,
                                       const std::vector<bool>& rel, std::size_t m,
                                       bool clamp) {
  std::size_t total = 0;
  for (bool r : rel) total += r;
  if (total == 0) return 0.0;
  const std::size_t denom = clamp ? std::min(total, m) : total;
  const std::size_t limit = std::min(m, ranking.size());
  std::size_t cum = 0;
  double s = 0.0;
  for (std::size_t i = 0; i < limit; ++i)
    if (rel[ranking[i]]) {
      ++cum;
      s += double(cum) / double(i + 1);
    }
  return s / double(denom);
}

inline double oracle_map(const std::vector<std::vector<std::size_t>>& rankings,
                         const std::vector<std::vector<bool>>& rels, std::size_t m,
                         bool clamp) {
  double s = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q)
    s += oracle_average_precision(rankings[q], rels[q], m, clamp);
  return s / double(rankings.size());
}

inline std::vector<std::pair<std::size_t, double>> oracle_topk(
    const std::vector<std::vector<std::size_t>>& rankings,
    const std::vector<std::vector<bool>>& rels, const std::vector<std::size_t>& ks) {
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t k : ks) {
    double s = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
      const std::size_t keff = std::min(k, rels[q].size());
      const std::size_t limit = std::min(keff, rankings[q].size());
      std::size_t hits = 0;
      for (std::size_t i = 0; i < limit; ++i) hits += rels[q][rankings[q][i]];
      s += double(hits) / double(keff);
    }
    curve.emplace_back(k, s / double(rankings.size()));
  }
  return curve;
}

inline std::vector<std::pair<double, double>> oracle_pr(
    const std::vector<std::vector<std::size_t>>& rankings,
    const std::vector<std::vector<bool>>& rels) {
  std::vector<double> sums(11, 0.0);
  std::size_t counted = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::size_t total = 0;
    for (bool r : rels[q]) total += r;
    if (total == 0) continue;
    ++counted;
    std::vector<double> best(11, 0.0);
    std::size_t cum = 0;
    for (std::size_t i = 0; i < rankings[q].size(); ++i) {
      cum += rels[q][rankings[q][i]];
      const double recall = double(cum) / double(total);
      const double precision = double(cum) / double(i + 1);
      for (std::size_t l = 0; l < 11; ++l)
        if (recall >= double(l) / 10.0 && precision > best[l]) best[l] = precision;
    }
    for (std::size_t l = 0; l < 11; ++l) sums[l] += best[l];
  }
  std::vector<std::pair<double, double>> curve(11);
  for (std::size_t l = 0; l < 11; ++l)
    curve[l] = {double(l) / 10.0, counted ? sums[l] / double(counted) : 0.0};
  return curve;
}

// ---- filesystem + process -----------------------------------------------------

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (;;) {
      auto cand = base / ("edsh_" + std::to_string(::getpid()) + "_" +
                          std::to_string(counter++) + "_" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(cand, ec)) {
        path = cand;
        return;
      }
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path.string() : (path / rel).string();
  }
};

// Runs the CLI binary, output silenced. Returns the exit code, or the
// negated signal number if the process died on one.
inline int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  if (st == -1) return -1;
  if (WIFEXITED(st)) return WEXITSTATUS(st);
  if (WIFSIGNALED(st)) return -WTERMSIG(st);
  return -1;
}

inline std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return slurp(a) == slurp(b);
}

}  // namespace testutil
