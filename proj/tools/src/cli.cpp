#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "deann/analysis.hpp"
#include "deann/ann.hpp"
#include "deann/dataset.hpp"
#include "deann/errors.hpp"
#include "deann/estimators.hpp"
#include "deann/harness.hpp"
#include "deann/synth.hpp"
#include "output.hpp"

namespace deann::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Options {
  std::string format = "json";
  std::string dataset;
  std::string queries;
  std::string ground_truth;
  std::string out;
  std::string kernel = "exponential";
  std::optional<double> bandwidth;
  std::optional<double> target_mu;
  double rel_tol = 0.01;
  std::string estimator = "deannp";
  std::vector<std::size_t> k;
  std::vector<std::size_t> m;
  std::vector<std::size_t> n_clusters;
  std::vector<std::size_t> n_probe;
  std::uint64_t seed = 0;
  std::size_t repetitions = 5;
  double rel_err_budget = 0.1;
  double kde_floor = 1e-16;
  double time_cap = 60.0;
  bool no_timing = false;
  std::size_t threads = 1;
  bool summary_only = false;
  // synth
  std::string kind = "gaussian_mixture";
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t components = 3;
  double separation = 10.0;
  double spread = 1.0;
  double alpha = 2.0;
  double beta = 0.5;
};

std::string sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void emit(std::ostream& out, const Json& j) { out << j.dump() << '\n'; }

Dataset load(const std::string& path, const char* flag) {
  if (path.empty()) throw std::invalid_argument(std::string(flag) + " is required");
  if (!fs::exists(path)) throw std::invalid_argument(std::string(flag) + ": no such file: " + path);
  return load_dataset(path, format_for_path(path));
}

fs::path manifest_path(const fs::path& values) {
  return fs::path(values.string() + ".manifest.json");
}

struct GroundTruth {
  std::vector<double> values;
  std::optional<Json> manifest;
};

GroundTruth load_ground_truth(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--ground-truth is required");
  if (!fs::exists(path)) throw std::invalid_argument("--ground-truth: no such file: " + path);
  GroundTruth gt;
  gt.values = load_values(path);
  const fs::path mpath = manifest_path(path);
  if (fs::exists(mpath)) {
    std::ifstream in(mpath);
    gt.manifest = Json::parse(in, nullptr, false);
    if (gt.manifest->is_discarded()) throw ParseError(mpath.string() + ": malformed manifest");
  }
  return gt;
}

/// Checks the ground truth manifest against the data and fills in the
/// bandwidth when it was not given on the command line.
void reconcile(const GroundTruth& gt, const Dataset& train, const Dataset& queries,
               KernelFamily family, std::optional<double>& bandwidth) {
  if (gt.values.size() != queries.size())
    throw std::invalid_argument("ground truth has " + std::to_string(gt.values.size()) +
                                " values but there are " + std::to_string(queries.size()) +
                                " queries");
  if (!gt.manifest) {
    if (!bandwidth) throw std::invalid_argument("--bandwidth is required");
    return;
  }
  const Json& m = *gt.manifest;
  if (m.value("kernel", "") != std::string(to_string(family)))
    throw std::invalid_argument("ground truth was computed with kernel " + m.value("kernel", "?"));
  if (m.value("dataset_hash", "") != hash_hex(dataset_hash(train)))
    throw std::invalid_argument("ground truth was computed on a different dataset");
  if (m.value("queries_hash", "") != hash_hex(dataset_hash(queries)))
    throw std::invalid_argument("ground truth was computed for different queries");
  const double h = m.value("bandwidth", 0.0);
  if (!bandwidth) {
    bandwidth = h;
  } else if (std::abs(*bandwidth - h) > 1e-12 * h) {
    throw std::invalid_argument("--bandwidth differs from the ground truth bandwidth " + sig6(h));
  }
}

ExperimentSpec make_spec(const Options& o, double bandwidth) {
  ExperimentSpec spec;
  spec.kernel = parse_kernel_family(o.kernel);
  spec.bandwidth = bandwidth;
  spec.estimator = parse_estimator(o.estimator);
  spec.k_grid = o.k;
  spec.m_grid = o.m;
  spec.n_lists_grid = o.n_clusters;
  spec.n_probe_grid = o.n_probe;
  spec.seed = o.seed;
  spec.repetitions = o.repetitions;
  spec.rel_err_budget = o.rel_err_budget;
  spec.kde_floor = o.kde_floor;
  spec.time_cap_seconds = o.time_cap;
  spec.timing = !o.no_timing;
  spec.threads = o.threads;
  return spec;
}

int cmd_synth(const Options& o, std::ostream& out) {
  if (o.n == 0 || o.d == 0) throw std::invalid_argument("--n and --d must be at least 1");
  if (o.out.empty()) throw std::invalid_argument("--out is required");
  Dataset data = [&] {
    if (o.kind == "gaussian_mixture") {
      if (o.components == 0) throw std::invalid_argument("--components must be at least 1");
      return gaussian_mixture(o.n, o.d, {o.components, o.separation, o.spread}, o.seed);
    }
    if (o.kind == "power_law_planted") return power_law_planted(o.n, o.d, {o.alpha, o.beta}, o.seed);
    throw std::invalid_argument("unknown --kind: " + o.kind);
  }();
  save_dataset(data, o.out, format_for_path(o.out));
  if (o.format == "table") {
    out << "wrote " << o.out << " (" << data.size() << " x " << data.dim() << ")\n";
  } else {
    emit(out, Json{{"type", "synth"}, {"kind", o.kind}, {"n", data.size()}, {"d", data.dim()},
                   {"seed", o.seed}, {"out", o.out}, {"hash", hash_hex(dataset_hash(data))}});
  }
  return Ok;
}

int cmd_split(const Options& o, std::ostream& out) {
  const Dataset data = load(o.dataset, "--dataset");
  if (o.out.empty()) throw std::invalid_argument("--out (output prefix) is required");
  const Splits s = split(data, o.seed);
  const std::string ext = format_for_path(o.dataset) == DataFormat::Csv ? ".csv" : ".bin";
  const std::string train = o.out + ".train" + ext;
  const std::string validation = o.out + ".validation" + ext;
  const std::string test = o.out + ".test" + ext;
  save_dataset(s.train, train, format_for_path(train));
  save_dataset(s.validation, validation, format_for_path(validation));
  save_dataset(s.test, test, format_for_path(test));
  if (o.format == "table") {
    out << "train      " << s.train.size() << "  " << train << '\n'
        << "validation " << s.validation.size() << "  " << validation << '\n'
        << "test       " << s.test.size() << "  " << test << '\n';
  } else {
    emit(out, Json{{"type", "split"}, {"seed", o.seed}, {"train", train},
                   {"train_size", s.train.size()}, {"validation", validation},
                   {"validation_size", s.validation.size()}, {"test", test},
                   {"test_size", s.test.size()}});
  }
  return Ok;
}

int cmd_ground_truth(const Options& o, std::ostream& out) {
  const Dataset data = load(o.dataset, "--dataset");
  const Dataset queries = load(o.queries, "--queries");
  if (!o.bandwidth) throw std::invalid_argument("--bandwidth is required");
  if (o.out.empty()) throw std::invalid_argument("--out is required");
  if (queries.dim() != data.dim())
    throw std::invalid_argument("queries have dimension " + std::to_string(queries.dim()) +
                                ", dataset has " + std::to_string(data.dim()));
  const KernelSpec kernel(parse_kernel_family(o.kernel), *o.bandwidth);
  const NaiveResult result = naive_kde(data, kernel, queries);
  save_values(o.out, result.values);

  Json manifest{{"kernel", std::string(to_string(kernel.family()))},
                {"bandwidth", *o.bandwidth},
                {"dataset", o.dataset},
                {"dataset_hash", hash_hex(dataset_hash(data))},
                {"queries", o.queries},
                {"queries_hash", hash_hex(dataset_hash(queries))},
                {"count", result.values.size()}};
  {
    std::ofstream mf(manifest_path(o.out), std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write " + manifest_path(o.out).string());
    mf << manifest.dump(2) << '\n';
  }
  const double median = lower_median(result.values);
  if (o.format == "table") {
    out << "wrote " << result.values.size() << " values to " << o.out << " (median "
        << sig6(median) << ")\n";
  } else {
    Json j{{"type", "ground_truth"}, {"out", o.out}, {"count", result.values.size()},
           {"median", median}};
    for (auto& [key, value] : manifest.items())
      if (key != "count") j[key] = value;
    emit(out, j);
  }
  return Ok;
}

int cmd_fit_bandwidth(const Options& o, std::ostream& out) {
  const Dataset train = load(o.dataset, "--dataset");
  const Dataset validation = load(o.queries, "--queries");
  if (!o.target_mu) throw std::invalid_argument("--target-mu is required");
  const KernelFamily family = parse_kernel_family(o.kernel);
  const BandwidthFit fit = fit_bandwidth(train, validation, family, *o.target_mu, o.rel_tol, o.seed);
  const std::string h = sig6(fit.h);
  Json j{{"type", "bandwidth"},
         {"kernel", std::string(to_string(family))},
         {"target_mu", *o.target_mu},
         {"h", std::stod(h)},
         {"achieved_median", fit.achieved_median},
         {"iterations", fit.iterations},
         {"dataset_hash", hash_hex(dataset_hash(train))},
         {"queries_hash", hash_hex(dataset_hash(validation))},
         {"seed", o.seed}};
  if (!o.out.empty()) {
    std::ofstream mf(o.out, std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write " + o.out);
    Json manifest = j;
    manifest.erase("type");
    manifest["h_exact"] = fit.h;
    mf << manifest.dump(2) << '\n';
  }
  if (o.format == "table")
    out << "h = " << h << "  achieved median = " << sig6(fit.achieved_median) << '\n';
  else
    emit(out, j);
  return Ok;
}

int cmd_grid_search(const Options& o, std::ostream& out) {
  const Dataset train = load(o.dataset, "--dataset");
  const Dataset validation = load(o.queries, "--queries");
  const GroundTruth gt = load_ground_truth(o.ground_truth);
  std::optional<double> bandwidth = o.bandwidth;
  const KernelFamily family = parse_kernel_family(o.kernel);
  reconcile(gt, train, validation, family, bandwidth);

  ExperimentSpec spec = make_spec(o, *bandwidth);
  apply_default_grids(spec, train.size());
  const GridSearchResult result = grid_search(train, validation, gt.values, spec);

  if (!o.out.empty()) {
    std::ofstream csv(o.out, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + o.out);
    csv << kCsvHeader << '\n';
    for (std::size_t i = 0; i < result.rows.size(); ++i)
      csv << row_csv(result.rows[i], result.selected == i) << '\n';
  }

  if (o.format == "table") {
    print_table(out, result.rows, result.selected);
    if (result.selected) {
      out << "selected: row " << *result.selected << '\n';
    } else {
      out << "no configuration within relative error " << sig6(spec.rel_err_budget);
      if (result.best_error)
        out << "; best achievable " << sig6(result.rows[*result.best_error].mean_rel_err);
      out << '\n';
    }
    return Ok;
  }
  for (const ResultRow& row : result.rows) emit(out, row_json(row));
  Json sel{{"type", "selection"}, {"rel_err_budget", spec.rel_err_budget},
           {"bandwidth", spec.bandwidth}, {"qualified", result.selected.has_value()}};
  if (result.selected) {
    sel["selected"] = *result.selected;
    sel["row"] = row_json(result.rows[*result.selected]);
  } else {
    sel["selected"] = nullptr;
  }
  if (result.best_error) {
    sel["best_error_row"] = *result.best_error;
    sel["best_error"] = result.rows[*result.best_error].mean_rel_err;
  }
  emit(out, sel);
  return Ok;
}

std::size_t single(const std::vector<std::size_t>& values, const char* flag) {
  if (values.size() > 1)
    throw std::invalid_argument(std::string(flag) + " takes a single value for evaluate");
  return values.empty() ? 0 : values.front();
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const Dataset train = load(o.dataset, "--dataset");
  const Dataset queries = load(o.queries, "--queries");
  const GroundTruth gt = load_ground_truth(o.ground_truth);
  std::optional<double> bandwidth = o.bandwidth;
  const KernelFamily family = parse_kernel_family(o.kernel);
  reconcile(gt, train, queries, family, bandwidth);

  ExperimentSpec spec = make_spec(o, *bandwidth);
  const ParamPoint point{single(o.k, "--k"), single(o.m, "--m"), single(o.n_clusters, "--n-clusters"),
                         single(o.n_probe, "--n-probe")};
  spec.k_grid = {point.k};
  spec.m_grid = {point.m};
  spec.n_lists_grid = {point.n_lists};
  spec.n_probe_grid = {point.n_probe};
  if (spec.threads != 1) throw std::invalid_argument("evaluate is single-threaded");
  spec.validate();
  if (uses_ann(spec.estimator) && point.k > 0 && (point.n_lists == 0 || point.n_probe == 0))
    throw std::invalid_argument("--n-clusters and --n-probe are required when k > 0");
  if (uses_ann(spec.estimator) && point.k + point.m > train.size())
    throw std::invalid_argument("k + m exceeds the dataset size");

  IndexCache cache(train, spec.seed);
  const EvaluationOutput result = evaluate(train, queries, gt.values, spec, point, cache, !o.summary_only);

  if (o.format == "table") {
    const ResultRow rows[] = {result.row};
    print_table(out, rows, std::nullopt);
    out << "preprocessing " << sig6(result.row.preprocessing_s) << " s\n";
    return Ok;
  }
  for (const QueryRecord& rec : result.records) emit(out, record_json(rec));
  emit(out, row_json(result.row));
  return Ok;
}

int cmd_recall(const Options& o, std::ostream& out) {
  const Dataset data = load(o.dataset, "--dataset");
  const Dataset queries = load(o.queries, "--queries");
  const std::size_t k = single(o.k, "--k");
  const std::size_t n_lists = single(o.n_clusters, "--n-clusters");
  const std::size_t n_probe = single(o.n_probe, "--n-probe");
  if (n_lists == 0 || n_lists > data.size())
    throw std::invalid_argument("--n-clusters must be in [1, n]");
  if (n_probe == 0 || n_probe > n_lists)
    throw std::invalid_argument("--n-probe must be in [1, n_clusters]");
  const double r = average_recall(data, queries, k, n_lists, n_probe, o.seed);
  if (o.format == "table")
    out << "recall@" << k << " = " << sig6(r) << '\n';
  else
    emit(out, Json{{"type", "recall"}, {"k", k}, {"n_lists", n_lists}, {"n_probe", n_probe},
                   {"seed", o.seed}, {"queries", queries.size()}, {"recall", r}});
  return Ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel density estimation with DEANN and baseline estimators"};
  app.name("deann");
  app.require_subcommand(1);
  Options o;

  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", o.format, "Output format")
        ->check(CLI::IsMember({"json", "table"}))
        ->capture_default_str();
  };
  auto add_kernel = [&](CLI::App* sub) {
    sub->add_option("--kernel", o.kernel, "exponential, gaussian or laplacian")
        ->check(CLI::IsMember({"exponential", "gaussian", "laplacian"}))
        ->capture_default_str();
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--dataset", o.dataset, "Dataset file (.bin or .csv)");
    sub->add_option("--queries", o.queries, "Query file (.bin or .csv)");
  };
  auto add_experiment = [&](CLI::App* sub) {
    add_data(sub);
    add_kernel(sub);
    add_format(sub);
    sub->add_option("--ground-truth", o.ground_truth, "Exact KDE values from ground-truth");
    sub->add_option("--bandwidth", o.bandwidth, "Kernel bandwidth (default: from the ground truth manifest)");
    sub->add_option("--estimator", o.estimator, "naive, rs, rsp, deann or deannp")
        ->check(CLI::IsMember({"naive", "rs", "rsp", "deann", "deannp"}))
        ->capture_default_str();
    sub->add_option("--k", o.k, "Exact neighbors")->delimiter(',');
    sub->add_option("--m", o.m, "Random samples")->delimiter(',');
    sub->add_option("--n-clusters", o.n_clusters, "IVF lists")->delimiter(',');
    sub->add_option("--n-probe", o.n_probe, "IVF lists probed per query")->delimiter(',');
    sub->add_option("--seed", o.seed, "Experiment seed")->capture_default_str();
    sub->add_option("--repetitions", o.repetitions, "Repetitions")->capture_default_str();
    sub->add_option("--rel-err-budget", o.rel_err_budget, "Relative error budget")->capture_default_str();
    sub->add_option("--kde-floor", o.kde_floor, "Queries with smaller exact KDE are excluded")
        ->capture_default_str();
    sub->add_option("--time-cap", o.time_cap, "Seconds per configuration")->capture_default_str();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--kind", o.kind, "gaussian_mixture or power_law_planted")
      ->check(CLI::IsMember({"gaussian_mixture", "power_law_planted"}))
      ->capture_default_str();
  synth->add_option("--n", o.n, "Rows")->required();
  synth->add_option("--d", o.d, "Dimension")->required();
  synth->add_option("--components", o.components, "Mixture components")->capture_default_str();
  synth->add_option("--separation", o.separation, "Std of the component centers")->capture_default_str();
  synth->add_option("--spread", o.spread, "Std within a component")->capture_default_str();
  synth->add_option("--alpha", o.alpha, "Power-law scale")->capture_default_str();
  synth->add_option("--beta", o.beta, "Power-law exponent")->capture_default_str();
  synth->add_option("--seed", o.seed, "Seed")->capture_default_str();
  synth->add_option("--out", o.out, "Output file")->required();
  add_format(synth);

  CLI::App* split_cmd = app.add_subcommand("split", "Split into train, validation and test sets");
  split_cmd->add_option("--dataset", o.dataset, "Dataset file")->required();
  split_cmd->add_option("--seed", o.seed, "Seed")->capture_default_str();
  split_cmd->add_option("--out", o.out, "Output prefix")->required();
  add_format(split_cmd);

  CLI::App* gt = app.add_subcommand("ground-truth", "Exact KDE values for a query set");
  add_data(gt);
  add_kernel(gt);
  add_format(gt);
  gt->add_option("--bandwidth", o.bandwidth, "Kernel bandwidth")->required();
  gt->add_option("--out", o.out, "Values file; the manifest goes to <out>.manifest.json")->required();

  CLI::App* fit = app.add_subcommand("fit-bandwidth", "Bandwidth reaching a target median KDE");
  add_data(fit);
  add_kernel(fit);
  add_format(fit);
  fit->add_option("--target-mu", o.target_mu, "Target median KDE in (0, 1)")->required();
  fit->add_option("--rel-tol", o.rel_tol, "Relative tolerance")->capture_default_str();
  fit->add_option("--seed", o.seed, "Seed for the scale sample")->capture_default_str();
  fit->add_option("--out", o.out, "Write the fit manifest here");

  CLI::App* grid = app.add_subcommand("grid-search", "Grid search on the validation queries");
  add_experiment(grid);
  grid->add_flag("--no-timing", o.no_timing, "Select by kernel evaluations instead of time");
  grid->add_option("--threads", o.threads, "Parallel configurations (requires --no-timing)")
      ->capture_default_str();
  grid->add_option("--out", o.out, "Write the CSV summary here");

  CLI::App* eval = app.add_subcommand("evaluate", "Evaluate one parameter point");
  add_experiment(eval);
  eval->add_flag("--summary-only", o.summary_only, "Omit per-query lines");

  CLI::App* rec = app.add_subcommand("recall", "Average IVF recall against brute force");
  add_data(rec);
  add_format(rec);
  rec->add_option("--k", o.k, "Neighbors")->required();
  rec->add_option("--n-clusters", o.n_clusters, "IVF lists")->required();
  rec->add_option("--n-probe", o.n_probe, "Lists probed")->required();
  rec->add_option("--seed", o.seed, "Seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Ok : InvalidArgs;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*split_cmd) return cmd_split(o, out);
    if (*gt) return cmd_ground_truth(o, out);
    if (*fit) return cmd_fit_bandwidth(o, out);
    if (*grid) return cmd_grid_search(o, out);
    if (*eval) return cmd_evaluate(o, out);
    if (*rec) return cmd_recall(o, out);
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return Infeasible;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return InvalidArgs;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return InvalidArgs;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return Failure;
  }
  return InvalidArgs;
}

}  // namespace deann::cli
