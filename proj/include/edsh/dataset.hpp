#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "edsh/io.hpp"

namespace edsh {

// Paired two-modality collection: columns are samples, aligned across x1,
// x2 and the 0/1 label matrix.
struct Dataset {
  DenseMatrix x1;      // d1 x n
  DenseMatrix x2;      // d2 x n
  DenseMatrix labels;  // c x n, entries 0/1, at least one 1 per column

  std::size_t size() const { return labels.cols; }
};

// Per-modality feature means captured from the training split.
struct CenteringStats {
  std::vector<double> mean1;
  std::vector<double> mean2;
};

struct SynthSpec {
  std::size_t n = 0;
  std::size_t classes = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

inline void validate(const Dataset& ds) {
  if (ds.x1.cols != ds.labels.cols || ds.x2.cols != ds.labels.cols)
    throw ShapeError("dataset: column counts differ (x1 " + ds.x1.shape_str() +
                     ", x2 " + ds.x2.shape_str() + ", labels " +
                     ds.labels.shape_str() + ")");
  if (ds.size() == 0) throw ArgumentError("dataset: no samples");
  for (double v : ds.labels.values)
    if (v != 0.0 && v != 1.0)
      throw ArgumentError("dataset: label entries must be exactly 0 or 1");
  for (std::size_t j = 0; j < ds.labels.cols; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < ds.labels.rows && !any; ++i)
      any = ds.labels(i, j) == 1.0;
    if (!any)
      throw ArgumentError("dataset: sample " + std::to_string(j) + " has no label");
  }
}

// Subtracts the per-row mean; returns the centered matrix and the means.
inline std::pair<DenseMatrix, std::vector<double>> center(const DenseMatrix& x) {
  if (x.cols == 0) throw ArgumentError("center: no columns");
  std::vector<double> mean(x.rows, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += x(i, j);
    mean[i] = s / double(x.cols);
  }
  DenseMatrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) -= mean[i];
  return {std::move(out), std::move(mean)};
}

// Centers new columns with previously captured means (queries reuse the
// training means; they are never re-estimated at query time).
inline DenseMatrix apply_center(const DenseMatrix& x, const std::vector<double>& mean) {
  if (mean.size() != x.rows)
    throw ShapeError("apply_center: mean length " + std::to_string(mean.size()) +
                     " vs " + std::to_string(x.rows) + " rows");
  DenseMatrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) -= mean[i];
  return out;
}

namespace detail {

inline DenseMatrix gather_cols(const DenseMatrix& x, const std::vector<std::size_t>& idx) {
  DenseMatrix out(x.rows, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j)
    for (std::size_t i = 0; i < x.rows; ++i) out(i, j) = x(i, idx[j]);
  return out;
}

}  // namespace detail

// Splits into (train, query) by a seeded shuffle; both parts keep ascending
// original order so sample pairing across modalities is preserved.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double query_fraction,
                                         std::uint64_t seed) {
  validate(ds);
  if (!(query_fraction > 0.0 && query_fraction < 1.0))
    throw ArgumentError("split: query fraction must lie strictly between 0 and 1");
  const std::size_t n = ds.size();
  if (n < 2) throw ArgumentError("split: need at least two samples");
  std::size_t q = static_cast<std::size_t>(std::llround(double(n) * query_fraction));
  q = std::min(std::max<std::size_t>(q, 1), n - 1);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> query_idx(idx.begin(), idx.begin() + q);
  std::vector<std::size_t> train_idx(idx.begin() + q, idx.end());
  std::sort(query_idx.begin(), query_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  Dataset train{detail::gather_cols(ds.x1, train_idx),
                detail::gather_cols(ds.x2, train_idx),
                detail::gather_cols(ds.labels, train_idx)};
  Dataset query{detail::gather_cols(ds.x1, query_idx),
                detail::gather_cols(ds.x2, query_idx),
                detail::gather_cols(ds.labels, query_idx)};
  return {std::move(train), std::move(query)};
}

// Gaussian class clusters around unit-norm centers with pairwise dot
// products at most 0.5, drawn independently per modality. Both modalities
// of a sample share its class, so cross-modal structure is real.
inline Dataset synth(const SynthSpec& spec) {
  if (spec.classes < 2)
    throw ArgumentError("synth: need at least two classes");
  if (spec.n < spec.classes)
    throw ArgumentError("synth: need at least one sample per class on average");
  if (spec.d1 < 1 || spec.d2 < 1)
    throw ArgumentError("synth: feature dimensions must be positive");
  if (!(spec.noise_sigma >= 0.0))
    throw ArgumentError("synth: noise sigma must be non-negative");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto draw_centers = [&](std::size_t dim) {
    std::vector<std::vector<double>> centers;
    centers.reserve(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        std::vector<double> g(dim);
        double norm_sq = 0.0;
        for (double& v : g) {
          v = gauss(rng);
          norm_sq += v * v;
        }
        if (norm_sq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : g) v *= inv;
        bool ok = true;
        for (const auto& other : centers) {
          double dot = 0.0;
          for (std::size_t i = 0; i < dim; ++i) dot += g[i] * other[i];
          if (dot > 0.5) {
            ok = false;
            break;
          }
        }
        if (ok) {
          centers.push_back(std::move(g));
          placed = true;
        }
      }
      if (!placed)
        throw GenerationError("synth: could not place " + std::to_string(spec.classes) +
                              " separated class centers in dimension " +
                              std::to_string(dim));
    }
    return centers;
  };

  const auto centers1 = draw_centers(spec.d1);
  const auto centers2 = draw_centers(spec.d2);

  std::uniform_int_distribution<std::size_t> pick(0, spec.classes - 1);
  std::vector<std::size_t> cls(spec.n);
  for (std::size_t j = 0; j < spec.n; ++j) cls[j] = pick(rng);

  DenseMatrix x1(spec.d1, spec.n), x2(spec.d2, spec.n), labels(spec.classes, spec.n);
  for (std::size_t j = 0; j < spec.n; ++j)
    for (std::size_t i = 0; i < spec.d1; ++i)
      x1(i, j) = centers1[cls[j]][i] + spec.noise_sigma * gauss(rng);
  for (std::size_t j = 0; j < spec.n; ++j)
    for (std::size_t i = 0; i < spec.d2; ++i)
      x2(i, j) = centers2[cls[j]][i] + spec.noise_sigma * gauss(rng);
  for (std::size_t j = 0; j < spec.n; ++j) labels(cls[j], j) = 1.0;
  return {std::move(x1), std::move(x2), std::move(labels)};
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  validate(ds);
  std::filesystem::create_directories(dir);
  save_matrix(dir / "x1.edshmat", ds.x1);
  save_matrix(dir / "x2.edshmat", ds.x2);
  save_matrix(dir / "labels.edshmat", ds.labels);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds{load_matrix(dir / "x1.edshmat"), load_matrix(dir / "x2.edshmat"),
             load_matrix(dir / "labels.edshmat")};
  validate(ds);
  return ds;
}

}  // namespace edsh
