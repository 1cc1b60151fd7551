#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "edsh/io.hpp"

namespace edsh {

// Relevance of every database item to one query: true iff the pair shares
// at least one label.
inline std::vector<bool> relevant(std::span<const double> query_labels,
                                  const DenseMatrix& db_labels) {
  if (query_labels.size() != db_labels.rows)
    throw ShapeError("relevant: query has " + std::to_string(query_labels.size()) +
                     " label rows, database has " + std::to_string(db_labels.rows));
  std::vector<bool> rel(db_labels.cols, false);
  for (std::size_t j = 0; j < db_labels.cols; ++j) {
    for (std::size_t i = 0; i < db_labels.rows; ++i) {
      if (query_labels[i] == 1.0 && db_labels(i, j) == 1.0) {
        rel[j] = true;
        break;
      }
    }
  }
  return rel;
}

// Average precision over the first m ranked results. The normalizer is
// min(total relevant in the database, m) by default; with
// clamp_denominator false it is the full relevant count, which penalizes
// queries whose relevant set cannot fit in the cutoff.
inline double average_precision(std::span<const std::size_t> ranking,
                                const std::vector<bool>& rel, std::size_t m,
                                bool clamp_denominator = true) {
  if (ranking.empty()) throw ArgumentError("average_precision: empty ranking");
  if (m < 1) throw ArgumentError("average_precision: cutoff must be at least 1");
  std::size_t total_relevant = 0;
  for (bool r : rel) total_relevant += r;
  if (total_relevant == 0) return 0.0;
  const std::size_t denom = clamp_denominator ? std::min(total_relevant, m) : total_relevant;
  const std::size_t limit = std::min(m, ranking.size());
  std::size_t cum = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranking[i] >= rel.size())
      throw ArgumentError("average_precision: ranked index out of range");
    if (rel[ranking[i]]) {
      ++cum;
      sum += double(cum) / double(i + 1);
    }
  }
  return sum / double(denom);
}

// Mean of per-query average precision; queries with no relevant item
// contribute zero.
inline double map_at(const std::vector<std::vector<std::size_t>>& rankings,
                     const std::vector<std::vector<bool>>& relevance, std::size_t m,
                     bool clamp_denominator = true) {
  if (rankings.size() != relevance.size())
    throw ShapeError("map_at: " + std::to_string(rankings.size()) + " rankings vs " +
                     std::to_string(relevance.size()) + " relevance rows");
  if (rankings.empty()) throw ArgumentError("map_at: no queries");
  double sum = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q)
    sum += average_precision(rankings[q], relevance[q], m, clamp_denominator);
  return sum / double(rankings.size());
}

// Mean precision at each requested depth, averaged over all queries.
// Depths beyond the database size are evaluated at the database size.
inline std::vector<std::pair<std::size_t, double>> topk_curve(
    const std::vector<std::vector<std::size_t>>& rankings,
    const std::vector<std::vector<bool>>& relevance, const std::vector<std::size_t>& ks,
    std::ostream* diag = nullptr) {
  if (rankings.size() != relevance.size() || rankings.empty())
    throw ArgumentError("topk_curve: need matching, non-empty rankings and relevance");
  if (ks.empty()) throw ArgumentError("topk_curve: no depths requested");
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] < 1 || (i > 0 && ks[i] <= ks[i - 1]))
      throw ArgumentError("topk_curve: depths must be positive and strictly ascending");

  std::vector<std::pair<std::size_t, double>> curve;
  curve.reserve(ks.size());
  bool clamped = false;
  for (std::size_t k : ks) {
    double sum = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
      const std::size_t db_size = relevance[q].size();
      const std::size_t keff = std::min(k, db_size);
      if (keff < k) clamped = true;
      const std::size_t limit = std::min(keff, rankings[q].size());
      std::size_t hits = 0;
      for (std::size_t i = 0; i < limit; ++i) hits += relevance[q][rankings[q][i]];
      sum += double(hits) / double(keff);
    }
    curve.emplace_back(k, sum / double(rankings.size()));
  }
  if (clamped && diag)
    *diag << "note: requested depth exceeds database size; clamped to the database\n";
  return curve;
}

// 11-point interpolated precision-recall curve averaged over queries that
// have at least one relevant item. At recall level l the interpolated
// precision is the maximum precision at any rank whose recall reaches l.
inline std::vector<std::pair<double, double>> pr_curve(
    const std::vector<std::vector<std::size_t>>& rankings,
    const std::vector<std::vector<bool>>& relevance, std::ostream* diag = nullptr) {
  if (rankings.size() != relevance.size() || rankings.empty())
    throw ArgumentError("pr_curve: need matching, non-empty rankings and relevance");

  std::vector<double> level_sums(11, 0.0);
  std::size_t counted = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::size_t total_relevant = 0;
    for (bool r : relevance[q]) total_relevant += r;
    if (total_relevant == 0) continue;
    ++counted;
    std::vector<double> best(11, 0.0);
    std::size_t cum = 0;
    for (std::size_t i = 0; i < rankings[q].size(); ++i) {
      if (rankings[q][i] >= relevance[q].size())
        throw ArgumentError("pr_curve: ranked index out of range");
      cum += relevance[q][rankings[q][i]];
      const double recall = double(cum) / double(total_relevant);
      const double precision = double(cum) / double(i + 1);
      for (std::size_t l = 0; l < 11; ++l)
        if (recall >= double(l) / 10.0 && precision > best[l]) best[l] = precision;
    }
    for (std::size_t l = 0; l < 11; ++l) level_sums[l] += best[l];
  }
  if (counted < rankings.size() && diag)
    *diag << "note: " << rankings.size() - counted
          << " queries have no relevant item and were left out of the curve\n";

  std::vector<std::pair<double, double>> curve(11);
  for (std::size_t l = 0; l < 11; ++l)
    curve[l] = {double(l) / 10.0, counted ? level_sums[l] / double(counted) : 0.0};
  return curve;
}

struct MetricsReport {
  double map = 0.0;
  std::size_t map_cutoff = 0;
  std::vector<double> per_query_ap;
  std::size_t queries_without_relevant = 0;
  std::vector<std::pair<std::size_t, double>> topk;
  std::vector<std::pair<double, double>> pr;
};

inline MetricsReport compute_metrics(const std::vector<std::vector<std::size_t>>& rankings,
                                     const std::vector<std::vector<bool>>& relevance,
                                     std::size_t map_cutoff,
                                     const std::vector<std::size_t>& ks,
                                     bool clamp_denominator = true,
                                     std::ostream* diag = nullptr) {
  MetricsReport rep;
  rep.map_cutoff = map_cutoff;
  rep.per_query_ap.reserve(rankings.size());
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::size_t total_relevant = 0;
    for (bool r : relevance[q]) total_relevant += r;
    if (total_relevant == 0) ++rep.queries_without_relevant;
    rep.per_query_ap.push_back(
        average_precision(rankings[q], relevance[q], map_cutoff, clamp_denominator));
  }
  rep.map = map_at(rankings, relevance, map_cutoff, clamp_denominator);
  rep.topk = topk_curve(rankings, relevance, ks, diag);
  rep.pr = pr_curve(rankings, relevance, diag);
  if (rep.queries_without_relevant && diag)
    *diag << "note: " << rep.queries_without_relevant
          << " queries have no relevant item; their average precision is 0\n";
  return rep;
}

inline nlohmann::json to_json(const MetricsReport& rep) {
  nlohmann::json j{{"map", rep.map},
                   {"map_cutoff", rep.map_cutoff},
                   {"queries", rep.per_query_ap.size()},
                   {"queries_without_relevant", rep.queries_without_relevant},
                   {"per_query_ap", rep.per_query_ap}};
  auto& topk = j["topk"] = nlohmann::json::array();
  for (const auto& [k, p] : rep.topk) topk.push_back({{"k", k}, {"precision", p}});
  auto& pr = j["pr"] = nlohmann::json::array();
  for (const auto& [r, p] : rep.pr) pr.push_back({{"recall", r}, {"precision", p}});
  return j;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed on " + path.string());
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_topk_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::size_t, double>>& curve) {
  std::string text = "k,precision\n";
  for (const auto& [k, p] : curve)
    text += std::to_string(k) + "," + detail::format_double(p) + "\n";
  detail::write_text_file(path, text);
}

inline void write_pr_csv(const std::filesystem::path& path,
                         const std::vector<std::pair<double, double>>& curve) {
  std::string text = "recall,precision\n";
  for (const auto& [r, p] : curve)
    text += detail::format_double(r) + "," + detail::format_double(p) + "\n";
  detail::write_text_file(path, text);
}

}  // namespace edsh
