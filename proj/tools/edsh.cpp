// Command-line front end: synthesize data, split it, train, encode, search
// and evaluate, with stable exit codes for scripting (0 ok, 1 usage,
// 2 runtime/numerical failure, 3 broken file).

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edsh/codes.hpp"
#include "edsh/metrics.hpp"

namespace {

using nlohmann::json;

struct SynthArgs {
  edsh::SynthSpec spec;
  std::string out;
};

struct SplitArgs {
  std::string data, train_out, query_out;
  double fraction = 0.1;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data, out;
  edsh::Hyperparams hyper;
};

struct EncodeArgs {
  std::string model, input, out;
  int modality = 1;
  bool no_rotation = false;
};

struct RetrieveArgs {
  std::string query, db, out;
  std::size_t top_m = 0;  // 0 keeps the full ranking
  std::size_t threads = 1;
};

struct EvalArgs {
  std::string rankings, query_labels, db_labels, out;
  std::size_t map_m = 100;
  std::vector<std::size_t> ks = {1, 5, 10, 20, 50, 100};
  bool ap_all_relevant = false;
};

struct BenchArgs {
  std::vector<std::size_t> sizes;
  std::size_t classes = 10, d1 = 64, d2 = 32;
  double noise = 0.1;
  edsh::Hyperparams hyper;
  std::string out;
};

struct ImportArgs {
  std::string csv, out;
};

// Parses a plain numeric CSV (rows = matrix rows, comma-separated columns)
// so users can bring external features or labels into the binary format.
edsh::DenseMatrix parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw edsh::IoError("cannot open " + path.string() + " for reading");
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  std::size_t line_start = 0;
  while (std::getline(in, line)) {
    const std::size_t this_line = line_start;
    line_start += line.size() + 1;
    if (line.empty()) continue;
    std::size_t line_cols = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw edsh::FormatError(path.string() + ": cannot parse '" + cell + "'",
                                this_line + pos);
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
        ++used;
      if (used != cell.size() || !std::isfinite(v))
        throw edsh::FormatError(path.string() + ": bad value '" + cell + "'",
                                this_line + pos);
      values.push_back(v);
      ++line_cols;
      pos = comma + 1;
    }
    if (rows == 0)
      cols = line_cols;
    else if (line_cols != cols)
      throw edsh::FormatError(path.string() + ": row " + std::to_string(rows) + " has " +
                                  std::to_string(line_cols) + " columns, expected " +
                                  std::to_string(cols),
                              this_line);
    ++rows;
  }
  if (rows == 0) throw edsh::FormatError(path.string() + ": no data rows", 0);
  return {rows, cols, std::move(values)};
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw edsh::IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw edsh::IoError("write failed on " + path.string());
}

int run_synth(const SynthArgs& a) {
  const edsh::Dataset ds = edsh::synth(a.spec);
  edsh::save_dataset(a.out, ds);
  std::cout << "wrote " << ds.size() << " samples (" << a.spec.classes << " classes, d1="
            << a.spec.d1 << ", d2=" << a.spec.d2 << ") to " << a.out << "\n";
  return 0;
}

int run_split(const SplitArgs& a) {
  const edsh::Dataset ds = edsh::load_dataset(a.data);
  const auto [train, query] = edsh::split(ds, a.fraction, a.seed);
  edsh::save_dataset(a.train_out, train);
  edsh::save_dataset(a.query_out, query);
  std::cout << "split " << ds.size() << " samples into " << train.size() << " train + "
            << query.size() << " query\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  const edsh::Dataset ds = edsh::load_dataset(a.data);
  const auto [model, report] = edsh::train(ds, a.hyper, &std::cerr);
  // deliberately path-free so identical runs in different directories
  // produce identical model artifacts
  const std::string provenance =
      "edsh train --bits " + std::to_string(a.hyper.k) + " --miter " +
      std::to_string(a.hyper.miter) + " --seed " + std::to_string(a.hyper.seed) +
      " (n=" + std::to_string(ds.size()) + ")";
  edsh::save_model(a.out, model, provenance);
  json rep{{"format", "edsh-train-report"},
           {"iterations", report.iterations_run},
           {"objective_trace", report.objective_trace},
           {"wall_seconds", report.wall_seconds}};
  write_json_file(std::filesystem::path(a.out) / "train_report.json", rep);
  std::cout << "trained on " << ds.size() << " samples: " << report.iterations_run
            << " iterations, final objective " << report.objective_trace.back() << "\n";
  return 0;
}

int run_encode(const EncodeArgs& a) {
  const edsh::EdshModel model = edsh::load_model(a.model);
  const edsh::DenseMatrix x = edsh::load_matrix(a.input);
  const edsh::PackedCodes codes = edsh::encode(model, x, a.modality, !a.no_rotation);
  edsh::save_codes(a.out, codes);
  std::cout << "encoded " << codes.n << " samples into " << codes.k << "-bit codes\n";
  return 0;
}

int run_retrieve(const RetrieveArgs& a) {
  if (a.threads < 1) throw edsh::ArgumentError("retrieve: need at least one worker");
  const edsh::PackedCodes query = edsh::load_codes(a.query);
  const edsh::PackedCodes db = edsh::load_codes(a.db);
  if (db.n == 0) throw edsh::ArgumentError("retrieve: database is empty");
  const std::size_t top = a.top_m == 0 ? db.n : a.top_m;

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> results(query.n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t qi = begin; qi < end; ++qi)
      results[qi] = edsh::rank(edsh::single_code(query, qi), db, top);
  };
  const std::size_t workers = std::min(a.threads, std::max<std::size_t>(query.n, 1));
  if (workers <= 1) {
    work(0, query.n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (query.n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(begin + chunk, query.n);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  json out{{"format", "edsh-rankings"},
           {"k", query.k},
           {"db_size", db.n},
           {"top_m", top}};
  auto& arr = out["rankings"] = json::array();
  for (std::size_t qi = 0; qi < query.n; ++qi) {
    json hits = json::array();
    for (const auto& [idx, dist] : results[qi]) hits.push_back({idx, dist});
    arr.push_back({{"query", qi}, {"results", std::move(hits)}});
  }
  write_json_file(a.out, out);
  std::cout << "ranked " << db.n << " database codes for " << query.n << " queries\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  std::ifstream in(a.rankings);
  if (!in) throw edsh::IoError("cannot open " + a.rankings + " for reading");
  json parsed;
  try {
    parsed = json::parse(in);
  } catch (const json::parse_error& e) {
    throw edsh::FormatError(a.rankings + ": " + e.what(), e.byte);
  }
  if (!parsed.is_object() || parsed.value("format", "") != "edsh-rankings")
    throw edsh::FormatError(a.rankings + ": not a rankings file", 0);

  const edsh::DenseMatrix qlabels = edsh::load_matrix(a.query_labels);
  const edsh::DenseMatrix dblabels = edsh::load_matrix(a.db_labels);
  if (qlabels.rows != dblabels.rows)
    throw edsh::ShapeError("eval: query and database label rows differ (" +
                           std::to_string(qlabels.rows) + " vs " +
                           std::to_string(dblabels.rows) + ")");

  std::vector<std::vector<std::size_t>> rankings;
  std::vector<std::vector<bool>> relevance;
  try {
    if (parsed.at("db_size").get<std::size_t>() != dblabels.cols)
      throw edsh::ShapeError("eval: rankings cover " +
                             parsed.at("db_size").dump() + " database items, labels cover " +
                             std::to_string(dblabels.cols));
    const auto& arr = parsed.at("rankings");
    if (arr.size() != qlabels.cols)
      throw edsh::ShapeError("eval: " + std::to_string(arr.size()) +
                             " rankings vs " + std::to_string(qlabels.cols) +
                             " query label columns");
    rankings.reserve(arr.size());
    for (std::size_t qi = 0; qi < arr.size(); ++qi) {
      const auto& entry = arr.at(qi);
      if (entry.at("query").get<std::size_t>() != qi)
        throw edsh::FormatError(a.rankings + ": rankings out of order", 0);
      std::vector<std::size_t> order;
      for (const auto& hit : entry.at("results"))
        order.push_back(hit.at(0).get<std::size_t>());
      rankings.push_back(std::move(order));
    }
  } catch (const json::exception& e) {
    throw edsh::FormatError(a.rankings + ": " + e.what(), 0);
  }
  for (std::size_t qi = 0; qi < qlabels.cols; ++qi) {
    std::vector<double> col(qlabels.rows);
    for (std::size_t i = 0; i < qlabels.rows; ++i) col[i] = qlabels(i, qi);
    relevance.push_back(edsh::relevant(col, dblabels));
  }

  const edsh::MetricsReport rep = edsh::compute_metrics(
      rankings, relevance, a.map_m, a.ks, !a.ap_all_relevant, &std::cerr);
  std::filesystem::create_directories(a.out);
  write_json_file(std::filesystem::path(a.out) / "metrics.json", edsh::to_json(rep));
  edsh::write_topk_csv(std::filesystem::path(a.out) / "topk.csv", rep.topk);
  edsh::write_pr_csv(std::filesystem::path(a.out) / "pr.csv", rep.pr);
  std::cout << "map@" << a.map_m << " = " << rep.map << " over "
            << rankings.size() << " queries\n";
  return 0;
}

int run_import(const ImportArgs& a) {
  const edsh::DenseMatrix m = parse_csv(a.csv);
  edsh::save_matrix(a.out, m);
  std::cout << "imported " << m.shape_str() << " matrix from " << a.csv << "\n";
  return 0;
}

int run_bench(const BenchArgs& a) {
  for (std::size_t i = 0; i < a.sizes.size(); ++i)
    if (a.sizes[i] < 1 || (i > 0 && a.sizes[i] <= a.sizes[i - 1]))
      throw edsh::ArgumentError("bench: sizes must be positive and strictly ascending");

  json runs = json::array();
  for (std::size_t i = 0; i < a.sizes.size(); ++i) {
    edsh::SynthSpec spec{a.sizes[i], a.classes, a.d1, a.d2, a.noise, a.hyper.seed + i};
    const edsh::Dataset ds = edsh::synth(spec);
    const auto [model, report] = edsh::train(ds, a.hyper, &std::cerr);
    const double per_iter = report.wall_seconds / double(report.iterations_run);
    runs.push_back({{"n", a.sizes[i]},
                    {"iterations", report.iterations_run},
                    {"wall_seconds", report.wall_seconds},
                    {"seconds_per_iteration", per_iter}});
    std::printf("n=%zu: %zu iterations, %.3fs total, %.4fs/iteration\n", a.sizes[i],
                report.iterations_run, report.wall_seconds, per_iter);
  }
  write_json_file(a.out, json{{"format", "edsh-bench"}, {"runs", runs}});
  return 0;
}

void add_hyper_flags(CLI::App* cmd, edsh::Hyperparams& h) {
  cmd->add_option("--bits", h.k, "code length in bits");
  cmd->add_option("--miter", h.miter, "maximum training iterations");
  cmd->add_option("--lambda1", h.lambda1, "modality-1 reconstruction weight");
  cmd->add_option("--lambda2", h.lambda2, "modality-2 reconstruction weight");
  cmd->add_option("--gamma", h.gamma, "label embedding weight");
  cmd->add_option("--alpha", h.alpha, "rotation alignment weight");
  cmd->add_option("--beta1", h.beta1, "modality-1 hash fit weight");
  cmd->add_option("--beta2", h.beta2, "modality-2 hash fit weight");
  cmd->add_option("--mu", h.mu, "ridge weight");
  cmd->add_option("--rel-tol", h.rel_tol, "relative objective decrease that stops training");
  cmd->add_option("--seed", h.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal supervised hashing: train, encode, search, evaluate"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* c_synth = app.add_subcommand("synth", "generate a labeled two-modality dataset");
  c_synth->add_option("--n", synth_args.spec.n, "number of samples")->required();
  c_synth->add_option("--classes", synth_args.spec.classes, "number of classes")->required();
  c_synth->add_option("--d1", synth_args.spec.d1, "modality-1 dimension")->required();
  c_synth->add_option("--d2", synth_args.spec.d2, "modality-2 dimension")->required();
  c_synth->add_option("--noise", synth_args.spec.noise_sigma, "cluster noise sigma");
  c_synth->add_option("--seed", synth_args.spec.seed, "random seed");
  c_synth->add_option("--out", synth_args.out, "output dataset directory")->required();

  SplitArgs split_args;
  auto* c_split = app.add_subcommand("split", "hold out a query set from a dataset");
  c_split->add_option("--data", split_args.data, "input dataset directory")->required();
  c_split->add_option("--fraction", split_args.fraction, "query fraction in (0,1)")->required();
  c_split->add_option("--seed", split_args.seed, "shuffle seed");
  c_split->add_option("--train-out", split_args.train_out, "train output directory")->required();
  c_split->add_option("--query-out", split_args.query_out, "query output directory")->required();

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "fit hash functions on a dataset");
  c_train->add_option("--data", train_args.data, "training dataset directory")->required();
  c_train->add_option("--out", train_args.out, "output model directory")->required();
  add_hyper_flags(c_train, train_args.hyper);

  EncodeArgs encode_args;
  auto* c_encode = app.add_subcommand("encode", "hash a feature matrix into binary codes");
  c_encode->add_option("--model", encode_args.model, "model directory")->required();
  c_encode->add_option("--input", encode_args.input, "feature matrix file")->required();
  c_encode->add_option("--modality", encode_args.modality, "feature modality (1 or 2)")
      ->required();
  c_encode->add_flag("--no-rotation", encode_args.no_rotation,
                     "skip the rotation before taking signs");
  c_encode->add_option("--out", encode_args.out, "output code file")->required();

  RetrieveArgs retrieve_args;
  auto* c_retrieve = app.add_subcommand("retrieve", "rank database codes per query");
  c_retrieve->add_option("--query", retrieve_args.query, "query code file")->required();
  c_retrieve->add_option("--db", retrieve_args.db, "database code file")->required();
  c_retrieve->add_option("--top-m", retrieve_args.top_m,
                         "results kept per query (0 = entire database)");
  c_retrieve->add_option("--threads", retrieve_args.threads, "worker threads");
  c_retrieve->add_option("--out", retrieve_args.out, "output rankings file")->required();

  EvalArgs eval_args;
  auto* c_eval = app.add_subcommand("eval", "score rankings against labels");
  c_eval->add_option("--rankings", eval_args.rankings, "rankings file")->required();
  c_eval->add_option("--query-labels", eval_args.query_labels, "query label matrix")
      ->required();
  c_eval->add_option("--db-labels", eval_args.db_labels, "database label matrix")->required();
  c_eval->add_option("--map-m", eval_args.map_m, "ranking cutoff for mean average precision");
  c_eval->add_option("--ks", eval_args.ks, "comma-separated depths for the top-k curve")
      ->delimiter(',');
  c_eval->add_flag("--ap-all-relevant", eval_args.ap_all_relevant,
                   "normalize average precision by all relevant items, not min(relevant, m)");
  c_eval->add_option("--out", eval_args.out, "output report directory")->required();

  ImportArgs import_args;
  auto* c_import = app.add_subcommand("import", "convert a numeric CSV into a matrix file");
  c_import->add_option("--csv", import_args.csv, "input CSV file")->required();
  c_import->add_option("--out", import_args.out, "output matrix file")->required();

  BenchArgs bench_args;
  auto* c_bench = app.add_subcommand("bench", "time training across dataset sizes");
  c_bench->add_option("--sizes", bench_args.sizes, "comma-separated dataset sizes")
      ->required()
      ->delimiter(',');
  c_bench->add_option("--classes", bench_args.classes, "number of classes");
  c_bench->add_option("--d1", bench_args.d1, "modality-1 dimension");
  c_bench->add_option("--d2", bench_args.d2, "modality-2 dimension");
  c_bench->add_option("--noise", bench_args.noise, "cluster noise sigma");
  c_bench->add_option("--out", bench_args.out, "output timing file")->required();
  add_hyper_flags(c_bench, bench_args.hyper);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_synth) return run_synth(synth_args);
    if (*c_split) return run_split(split_args);
    if (*c_train) return run_train(train_args);
    if (*c_encode) return run_encode(encode_args);
    if (*c_retrieve) return run_retrieve(retrieve_args);
    if (*c_eval) return run_eval(eval_args);
    if (*c_import) return run_import(import_args);
    if (*c_bench) return run_bench(bench_args);
  } catch (const edsh::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const edsh::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const edsh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
