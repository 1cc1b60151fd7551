#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <utility>

#include <json.hpp>

#include "edsh/dataset.hpp"
#include "edsh/linalg.hpp"

namespace edsh {

struct Hyperparams {
  double lambda1 = 1.0;  // modality-1 reconstruction weight
  double lambda2 = 1.0;  // modality-2 reconstruction weight
  double gamma = 10.0;   // label embedding weight
  double alpha = 2.0;    // rotation alignment weight
  double beta1 = 10.0;   // modality-1 hash fit weight
  double beta2 = 10.0;   // modality-2 hash fit weight
  double mu = 5.0;       // ridge on U1, U2, V, W1, W2
  std::size_t k = 16;    // code length in bits
  std::size_t miter = 20;
  double rel_tol = 1e-5;  // stop once the relative objective decrease falls below
  std::uint64_t seed = 0;
};

inline void validate(const Hyperparams& h) {
  if (!(h.lambda1 > 0.0 && h.lambda2 > 0.0 && h.gamma > 0.0 && h.alpha > 0.0 &&
        h.beta1 > 0.0 && h.beta2 > 0.0 && h.mu > 0.0))
    throw ArgumentError("hyperparams: all weights must be positive");
  if (h.k < 1) throw ArgumentError("hyperparams: code length must be at least 1");
  if (h.miter < 1) throw ArgumentError("hyperparams: need at least one iteration");
  if (!(h.rel_tol >= 0.0)) throw ArgumentError("hyperparams: rel_tol must be non-negative");
}

// Trained state. Factor shapes, with d_m features, c classes, n samples:
// u1 d1xk, u2 d2xk, p cxk, v kxn, r kxk orthogonal, b kxn with +-1 entries,
// w1 kxd1, w2 kxd2.
struct EdshModel {
  DenseMatrix u1, u2;
  DenseMatrix p;
  DenseMatrix v;
  DenseMatrix r;
  DenseMatrix b;
  DenseMatrix w1, w2;
  CenteringStats centering;
  Hyperparams hyper;
};

struct TrainReport {
  std::vector<double> objective_trace;  // one value per completed iteration
  std::size_t iterations_run = 0;
  double wall_seconds = 0.0;
};

namespace detail {

inline void check_dims(const EdshModel& m, const Dataset& ds) {
  const std::size_t k = m.hyper.k, n = ds.size();
  auto expect = [](const DenseMatrix& a, std::size_t r, std::size_t c, const char* name) {
    if (a.rows != r || a.cols != c)
      throw ShapeError(std::string(name) + " is " + a.shape_str() + ", expected " +
                       std::to_string(r) + "x" + std::to_string(c));
  };
  expect(m.u1, ds.x1.rows, k, "u1");
  expect(m.u2, ds.x2.rows, k, "u2");
  expect(m.p, ds.labels.rows, k, "p");
  expect(m.v, k, n, "v");
  expect(m.r, k, k, "r");
  expect(m.b, k, n, "b");
  expect(m.w1, k, ds.x1.rows, "w1");
  expect(m.w2, k, ds.x2.rows, "w2");
}

inline const DenseMatrix& modality_features(const Dataset& ds, int modality) {
  if (modality == 1) return ds.x1;
  if (modality == 2) return ds.x2;
  throw ArgumentError("modality must be 1 or 2, got " + std::to_string(modality));
}

// The two objective terms that depend on the codes.
inline double code_terms(const EdshModel& m, const Dataset& ds, const DenseMatrix& b) {
  return m.hyper.gamma * frob_sq_diff(ds.labels, matmul(m.p, b)) +
         m.hyper.alpha * frob_sq_diff(b, matmul(m.r, m.v));
}

}  // namespace detail

// Weighted sum of the reconstruction, label embedding, rotation alignment
// and hash fit residuals, plus the ridge on U1, U2, V, W1, W2.
inline double objective(const EdshModel& m, const Dataset& ds) {
  detail::check_dims(m, ds);
  const Hyperparams& h = m.hyper;
  double j = 0.0;
  j += h.lambda1 * frob_sq_diff(ds.x1, matmul(m.u1, m.v));
  j += h.lambda2 * frob_sq_diff(ds.x2, matmul(m.u2, m.v));
  j += h.gamma * frob_sq_diff(ds.labels, matmul(m.p, m.b));
  j += h.alpha * frob_sq_diff(m.b, matmul(m.r, m.v));
  j += h.beta1 * frob_sq_diff(m.v, matmul(m.w1, ds.x1));
  j += h.beta2 * frob_sq_diff(m.v, matmul(m.w2, ds.x2));
  j += h.mu * (frob_sq(m.u1) + frob_sq(m.u2) + frob_sq(m.v) + frob_sq(m.w1) +
               frob_sq(m.w2));
  return j;
}

// U = X V^T (V V^T + (mu/lambda) I)^-1, the ridge least-squares loadings.
inline DenseMatrix update_u(const EdshModel& m, const Dataset& ds, int modality) {
  const DenseMatrix& x = detail::modality_features(ds, modality);
  const double lambda = modality == 1 ? m.hyper.lambda1 : m.hyper.lambda2;
  DenseMatrix s = matmul(m.v, transpose(m.v));
  const double ridge = m.hyper.mu / lambda;
  for (std::size_t i = 0; i < s.rows; ++i) s(i, i) += ridge;
  return transpose(spd_solve(s, matmul(m.v, transpose(x))));
}

// P = Y B^T (B B^T + eps I)^-1; the small ridge keeps the Gram matrix
// invertible when code rows duplicate, which +-1 matrices readily do.
inline DenseMatrix update_p(const EdshModel& m, const Dataset& ds) {
  constexpr double kLabelRidge = 1e-6;
  DenseMatrix s = matmul(m.b, transpose(m.b));
  for (std::size_t i = 0; i < s.rows; ++i) s(i, i) += kLabelRidge;
  return transpose(spd_solve(s, matmul(m.b, transpose(ds.labels))));
}

// V solves the normal equations pooling every term that touches it:
// (sum_m lambda_m U_m^T U_m + alpha R^T R + (beta1 + beta2 + mu) I) V =
//  sum_m lambda_m U_m^T X_m + alpha R^T B + sum_m beta_m W_m X_m.
inline DenseMatrix update_v(const EdshModel& m, const Dataset& ds) {
  const Hyperparams& h = m.hyper;
  DenseMatrix lhs = matmul(transpose(m.u1), m.u1);
  scale_in_place(lhs, h.lambda1);
  add_scaled(lhs, h.lambda2, matmul(transpose(m.u2), m.u2));
  add_scaled(lhs, h.alpha, matmul(transpose(m.r), m.r));
  for (std::size_t i = 0; i < lhs.rows; ++i) lhs(i, i) += h.beta1 + h.beta2 + h.mu;

  DenseMatrix rhs = matmul(transpose(m.u1), ds.x1);
  scale_in_place(rhs, h.lambda1);
  add_scaled(rhs, h.lambda2, matmul(transpose(m.u2), ds.x2));
  add_scaled(rhs, h.alpha, matmul(transpose(m.r), m.b));
  add_scaled(rhs, h.beta1, matmul(m.w1, ds.x1));
  add_scaled(rhs, h.beta2, matmul(m.w2, ds.x2));
  return spd_solve(lhs, rhs);
}

// Orthogonal Procrustes: the orthogonal matrix nearest to aligning V with B
// is the polar factor of B V^T.
inline DenseMatrix update_r(const EdshModel& m) {
  const SvdResult f = svd_small(matmul(m.b, transpose(m.v)));
  return matmul(f.u, transpose(f.v));
}

// B = sgn(alpha R V + gamma P^T Y), the entrywise minimizer of the linear
// code objective; sgn(0) is +1 so codes are reproducible.
inline DenseMatrix update_b(const EdshModel& m, const Dataset& ds) {
  DenseMatrix z = matmul(m.r, m.v);
  scale_in_place(z, m.hyper.alpha);
  add_scaled(z, m.hyper.gamma, matmul(transpose(m.p), ds.labels));
  for (double& v : z.values) v = v >= 0.0 ? 1.0 : -1.0;
  return z;
}

// W = V X^T (X X^T + (mu/beta) I)^-1, the ridge regression of V onto X.
inline DenseMatrix update_w(const EdshModel& m, const Dataset& ds, int modality) {
  const DenseMatrix& x = detail::modality_features(ds, modality);
  const double beta = modality == 1 ? m.hyper.beta1 : m.hyper.beta2;
  DenseMatrix s = matmul(x, transpose(x));
  const double ridge = m.hyper.mu / beta;
  for (std::size_t i = 0; i < s.rows; ++i) s(i, i) += ridge;
  return transpose(spd_solve(s, matmul(x, transpose(m.v))));
}

// Analytic gradients of objective() with all other blocks held fixed.

inline DenseMatrix objective_grad_u(const EdshModel& m, const Dataset& ds, int modality) {
  const DenseMatrix& x = detail::modality_features(ds, modality);
  const DenseMatrix& u = modality == 1 ? m.u1 : m.u2;
  const double lambda = modality == 1 ? m.hyper.lambda1 : m.hyper.lambda2;
  DenseMatrix g = matmul(subtract(matmul(u, m.v), x), transpose(m.v));
  scale_in_place(g, 2.0 * lambda);
  add_scaled(g, 2.0 * m.hyper.mu, u);
  return g;
}

inline DenseMatrix objective_grad_v(const EdshModel& m, const Dataset& ds) {
  const Hyperparams& h = m.hyper;
  DenseMatrix g = matmul(transpose(m.u1), subtract(matmul(m.u1, m.v), ds.x1));
  scale_in_place(g, h.lambda1);
  add_scaled(g, h.lambda2, matmul(transpose(m.u2), subtract(matmul(m.u2, m.v), ds.x2)));
  add_scaled(g, h.alpha, matmul(transpose(m.r), subtract(matmul(m.r, m.v), m.b)));
  add_scaled(g, h.beta1, subtract(m.v, matmul(m.w1, ds.x1)));
  add_scaled(g, h.beta2, subtract(m.v, matmul(m.w2, ds.x2)));
  add_scaled(g, h.mu, m.v);
  scale_in_place(g, 2.0);
  return g;
}

inline DenseMatrix objective_grad_w(const EdshModel& m, const Dataset& ds, int modality) {
  const DenseMatrix& x = detail::modality_features(ds, modality);
  const DenseMatrix& w = modality == 1 ? m.w1 : m.w2;
  const double beta = modality == 1 ? m.hyper.beta1 : m.hyper.beta2;
  DenseMatrix g = matmul(subtract(matmul(w, x), m.v), transpose(x));
  scale_in_place(g, 2.0 * beta);
  add_scaled(g, 2.0 * m.hyper.mu, w);
  return g;
}

// Seeded random starting point: B uniform +-1, V/W gaussian with variance
// 1/k, R orthonormalized gaussian; U1, U2, P start at their closed forms
// given those. Expects already-centered features.
inline EdshModel init_state(const Dataset& train, const Hyperparams& hyper,
                            std::ostream* diag = nullptr) {
  validate(hyper);
  validate(train);
  const std::size_t n = train.size(), k = hyper.k;
  if (n <= k && diag)
    *diag << "warning: only " << n << " samples for " << k
          << " bits; code Gram matrices may be ill-conditioned\n";

  EdshModel m;
  m.hyper = hyper;
  std::mt19937_64 rng(hyper.seed);
  std::uniform_int_distribution<int> coin(0, 1);
  std::normal_distribution<double> scaled_gauss(0.0, 1.0 / std::sqrt(double(k)));
  std::normal_distribution<double> unit_gauss(0.0, 1.0);

  m.b = DenseMatrix(k, n);
  for (double& v : m.b.values) v = coin(rng) ? 1.0 : -1.0;
  m.v = DenseMatrix(k, n);
  for (double& v : m.v.values) v = scaled_gauss(rng);
  m.w1 = DenseMatrix(k, train.x1.rows);
  for (double& v : m.w1.values) v = scaled_gauss(rng);
  m.w2 = DenseMatrix(k, train.x2.rows);
  for (double& v : m.w2.values) v = scaled_gauss(rng);
  for (;;) {
    m.r = DenseMatrix(k, k);
    for (double& v : m.r.values) v = unit_gauss(rng);
    if (orthonormalize_columns(m.r)) break;
  }
  m.centering.mean1.assign(train.x1.rows, 0.0);
  m.centering.mean2.assign(train.x2.rows, 0.0);

  m.u1 = update_u(m, train, 1);
  m.u2 = update_u(m, train, 2);
  m.p = update_p(m, train);
  return m;
}

// Alternating optimization: each iteration refreshes U1, U2, P, V, R, B,
// W1, W2 in that order, then records the objective. Stops at miter or when
// the relative decrease drops below rel_tol.
//
// Every continuous step is the exact minimizer of its block, so it cannot
// increase the objective. The sign step minimizes only the linear part of
// the code terms, and committing it blindly can make gamma*|Y - PB|^2 jump
// (P's columns are not orthonormal, so |PB|^2 moves when codes flip). A
// candidate code matrix is therefore kept only when it does not worsen the
// code-dependent terms, which preserves the non-increasing objective trace.
inline std::pair<EdshModel, TrainReport> train(const Dataset& ds, const Hyperparams& hyper,
                                               std::ostream* diag = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(ds);
  auto [x1c, mean1] = center(ds.x1);
  auto [x2c, mean2] = center(ds.x2);
  Dataset centered{std::move(x1c), std::move(x2c), ds.labels};

  EdshModel m = init_state(centered, hyper, diag);
  m.centering = {std::move(mean1), std::move(mean2)};

  TrainReport report;
  double prev = 0.0;
  for (std::size_t it = 1; it <= hyper.miter; ++it) {
    m.u1 = update_u(m, centered, 1);
    m.u2 = update_u(m, centered, 2);
    m.p = update_p(m, centered);
    m.v = update_v(m, centered);
    m.r = update_r(m);
    DenseMatrix candidate = update_b(m, centered);
    if (detail::code_terms(m, centered, candidate) <= detail::code_terms(m, centered, m.b))
      m.b = std::move(candidate);
    m.w1 = update_w(m, centered, 1);
    m.w2 = update_w(m, centered, 2);
    const double obj = objective(m, centered);
    if (!std::isfinite(obj)) throw TrainingError("objective is not finite", it);
    report.objective_trace.push_back(obj);
    if (it > 1 && prev - obj < hyper.rel_tol * std::abs(prev)) break;
    prev = obj;
  }
  report.iterations_run = report.objective_trace.size();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(m), std::move(report)};
}

// ---- model directory I/O ----------------------------------------------
//
// A model directory holds one .edshmat file per factor plus meta.json with
// the hyperparameters, centering means and a provenance note. No volatile
// fields (timestamps, durations) so identical runs serialize identically.

namespace detail {

inline nlohmann::json hyper_to_json(const Hyperparams& h) {
  return {{"lambda1", h.lambda1}, {"lambda2", h.lambda2}, {"gamma", h.gamma},
          {"alpha", h.alpha},     {"beta1", h.beta1},     {"beta2", h.beta2},
          {"mu", h.mu},           {"k", h.k},             {"miter", h.miter},
          {"rel_tol", h.rel_tol}, {"seed", h.seed}};
}

inline Hyperparams hyper_from_json(const nlohmann::json& j) {
  Hyperparams h;
  try {
    h.lambda1 = j.at("lambda1").get<double>();
    h.lambda2 = j.at("lambda2").get<double>();
    h.gamma = j.at("gamma").get<double>();
    h.alpha = j.at("alpha").get<double>();
    h.beta1 = j.at("beta1").get<double>();
    h.beta2 = j.at("beta2").get<double>();
    h.mu = j.at("mu").get<double>();
    h.k = j.at("k").get<std::size_t>();
    h.miter = j.at("miter").get<std::size_t>();
    h.rel_tol = j.at("rel_tol").get<double>();
    h.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta.json: ") + e.what(), 0);
  }
  return h;
}

}  // namespace detail

inline void save_model(const std::filesystem::path& dir, const EdshModel& m,
                       const std::string& provenance) {
  std::filesystem::create_directories(dir);
  save_matrix(dir / "u1.edshmat", m.u1);
  save_matrix(dir / "u2.edshmat", m.u2);
  save_matrix(dir / "p.edshmat", m.p);
  save_matrix(dir / "v.edshmat", m.v);
  save_matrix(dir / "r.edshmat", m.r);
  save_matrix(dir / "b.edshmat", m.b);
  save_matrix(dir / "w1.edshmat", m.w1);
  save_matrix(dir / "w2.edshmat", m.w2);
  nlohmann::json meta{{"format", "edsh-model"},
                      {"k", m.hyper.k},
                      {"hyper", detail::hyper_to_json(m.hyper)},
                      {"mean1", m.centering.mean1},
                      {"mean2", m.centering.mean2},
                      {"provenance", provenance}};
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw IoError("cannot open " + (dir / "meta.json").string() + " for writing");
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("write failed on " + (dir / "meta.json").string());
}

inline EdshModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot open " + (dir / "meta.json").string() + " for reading");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("meta.json: " + std::string(e.what()), e.byte);
  }
  if (!meta.is_object() || meta.value("format", "") != "edsh-model")
    throw FormatError("meta.json: not a model description", 0);

  EdshModel m;
  try {
    m.hyper = detail::hyper_from_json(meta.at("hyper"));
    m.centering.mean1 = meta.at("mean1").get<std::vector<double>>();
    m.centering.mean2 = meta.at("mean2").get<std::vector<double>>();
    if (meta.at("k").get<std::size_t>() != m.hyper.k)
      throw FormatError("meta.json: k disagrees with hyperparameters", 0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta.json: ") + e.what(), 0);
  }
  m.u1 = load_matrix(dir / "u1.edshmat");
  m.u2 = load_matrix(dir / "u2.edshmat");
  m.p = load_matrix(dir / "p.edshmat");
  m.v = load_matrix(dir / "v.edshmat");
  m.r = load_matrix(dir / "r.edshmat");
  m.b = load_matrix(dir / "b.edshmat");
  m.w1 = load_matrix(dir / "w1.edshmat");
  m.w2 = load_matrix(dir / "w2.edshmat");

  const std::size_t k = m.hyper.k;
  auto expect = [&](const DenseMatrix& a, std::size_t r, std::size_t c, const char* name) {
    if (a.rows != r || a.cols != c)
      throw FormatError("model dir: " + std::string(name) + " is " + a.shape_str() +
                        ", expected " + std::to_string(r) + "x" + std::to_string(c), 0);
  };
  expect(m.u1, m.centering.mean1.size(), k, "u1");
  expect(m.u2, m.centering.mean2.size(), k, "u2");
  expect(m.v, k, m.v.cols, "v");
  expect(m.r, k, k, "r");
  expect(m.b, k, m.v.cols, "b");
  expect(m.w1, k, m.centering.mean1.size(), "w1");
  expect(m.w2, k, m.centering.mean2.size(), "w2");
  expect(m.p, m.p.rows, k, "p");

  DenseMatrix rrt = matmul(m.r, transpose(m.r));
  for (std::size_t i = 0; i < k; ++i) rrt(i, i) -= 1.0;
  if (frob_norm(rrt) > 1e-8)
    throw FormatError("model dir: rotation is not orthogonal", 0);
  for (std::size_t i = 0; i < m.b.values.size(); ++i)
    if (m.b.values[i] != 1.0 && m.b.values[i] != -1.0)
      throw FormatError("model dir: codes must be +-1", 0);
  return m;
}

}  // namespace edsh
