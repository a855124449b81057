// Command-line front end: distances | steer | eval | sweep | tree | synth.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctxsteer/ctxsteer.hpp"

namespace fs = std::filesystem;
using namespace ctxsteer;

namespace {

struct Options {
  // inputs
  std::string corpus;
  std::string matrix;
  std::string encoding = "auto";
  std::string classes;  // comma separated subset filter
  // distances
  std::string codec = "deflate";
  std::string measure = "ncd";
  std::string standardize = "none";
  // steering
  std::string policy = "above-avg";
  std::size_t refs = 1;
  std::string ref_strategy = "centroid";
  std::string aggregate = "mean";
  std::string weighting = "row";
  std::string silhouette_space = "feature";
  // evaluation
  std::string method = "ours";
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t feature_count = 0;
  std::size_t knn_k = 1;
  std::size_t iterations = 10;
  std::size_t trees = 100;
  // sweep
  std::string mode = "subsets";
  std::size_t min_classes = 2;
  std::size_t max_classes = 0;
  std::vector<std::string> grid_methods;
  std::vector<std::size_t> grid_refs;
  std::vector<std::string> grid_policies;
  std::vector<std::string> grid_aggregates;
  // synth
  std::size_t synth_classes = 2;
  std::size_t synth_docs = 60;
  std::size_t synth_bytes = 2048;
  double synth_weight = 0.5;
  // outputs
  std::string out;
  std::string csv;
  std::size_t workers = 1;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

SteeringConfig steering_config(const Options& o) {
  SteeringConfig c;
  c.policy = parse_policy(o.policy);
  c.refs = o.refs;
  c.strategy = parse_strategy(o.ref_strategy);
  c.aggregate = parse_aggregate(o.aggregate);
  c.weighting = parse_weighting(o.weighting);
  require(o.silhouette_space == "feature" || o.silhouette_space == "cophenetic", Errc::invalid_input,
          "unknown silhouette space '" + o.silhouette_space + "'");
  c.silhouette_space = o.silhouette_space == "feature" ? SilhouetteSpace::feature : SilhouetteSpace::cophenetic;
  return c;
}

MethodConfig method_config(const Options& o) {
  MethodConfig m;
  m.method = parse_method(o.method);
  m.steering = steering_config(o);
  m.feature_count = o.feature_count;
  m.knn_k = o.knn_k;
  m.iterations = o.iterations;
  m.seed = o.seed;
  m.trees = o.trees;
  return m;
}

json effective_config(const Options& o) {
  return {{"corpus", o.corpus},
          {"matrix", o.matrix},
          {"encoding", o.encoding},
          {"classes", o.classes},
          {"codec", o.codec},
          {"measure", o.measure},
          {"standardize", o.standardize},
          {"policy", o.policy},
          {"refs", o.refs},
          {"ref_strategy", o.ref_strategy},
          {"aggregate", o.aggregate},
          {"weighting", o.weighting},
          {"silhouette_space", o.silhouette_space},
          {"method", o.method},
          {"folds", o.folds},
          {"seed", o.seed},
          {"feature_count", o.feature_count},
          {"knn_k", o.knn_k},
          {"iterations", o.iterations},
          {"trees", o.trees},
          {"workers", o.workers}};
}

struct Loaded {
  DistanceMatrix matrix;
  json inputs = json::object();  // path -> crc32
  Standardize fold_standardize = Standardize::none;
};

std::string crc_hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

/// Matrix from --matrix or built from --corpus, filtered by --classes and
/// standardized per --standardize. `pipeline` is left to the fold loop when
/// `per_fold` is set, otherwise it uses every column.
Loaded load_input(const Options& o, bool per_fold) {
  Loaded l;
  require(o.corpus.empty() != o.matrix.empty(), Errc::invalid_input, "exactly one of --corpus or --matrix is required");
  const auto subset = split_list(o.classes);
  if (!o.matrix.empty()) {
    l.matrix = load_matrix(o.matrix);
    l.inputs[o.matrix] = crc_hex(crc32_of(as_bytes(read_file(o.matrix))));
    l.inputs[sidecar_path(o.matrix).string()] = crc_hex(crc32_of(as_bytes(read_file(sidecar_path(o.matrix)))));
    if (!subset.empty()) {
      const std::set<std::string> keep(subset.begin(), subset.end());
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < l.matrix.size(); ++i)
        if (keep.count(l.matrix.labels[i])) ids.push_back(l.matrix.ids[i]);
      require(!ids.empty(), Errc::empty_class, "class filter keeps no objects");
      l.matrix = submatrix(l.matrix, ids);
    }
  } else {
    const Measure measure = parse_measure(o.measure);
    const Codec codec = parse_codec(o.codec);
    IngestOptions io;
    io.encoding = parse_encoding(o.encoding);
    io.for_rlz = codec == Codec::rlz;
    io.classes = subset;
    const Corpus corpus = ingest(o.corpus, io);
    for (const auto& e : corpus.manifest.entries) l.inputs[e.path] = crc_hex(e.crc32);
    l.matrix = build_distance_matrix(corpus.objects, measure, codec, o.workers);
  }

  if (o.standardize == "none") return l;
  if (o.standardize == "pipeline") {
    require(l.matrix.measure == Measure::nrc, Errc::measure_mismatch, "pipeline standardization needs --measure nrc");
    if (per_fold) {
      l.fold_standardize = Standardize::pipeline;
    } else {
      l.matrix = standardize_rows(l.matrix, row_stats_from_matrix(l.matrix, l.matrix.ids, StatsProvenance::pipeline));
    }
    return l;
  }
  if (o.standardize.starts_with("external:")) {
    const std::string path = o.standardize.substr(9);
    RowStats stats;
    try {
      stats = row_stats_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
      fail(Errc::invalid_input, "bad stats file " + path + ": " + e.what());
    }
    stats.provenance = StatsProvenance::external;
    l.inputs[path] = crc_hex(crc32_of(as_bytes(read_file(path))));
    l.matrix = standardize_rows(l.matrix, stats);
    return l;
  }
  fail(Errc::invalid_input, "unknown --standardize value '" + o.standardize + "'");
}

json manifest(const std::string& command, const Options& o, const json& inputs) {
  return {{"tool", "ctxsteer"}, {"subcommand", command}, {"config", effective_config(o)}, {"seed", o.seed},
          {"inputs", inputs}};
}

std::string require_out(const Options& o) {
  require(!o.out.empty(), Errc::invalid_input, "--out is required");
  return o.out;
}

void run_distances(const Options& o) {
  const Loaded l = load_input(o, false);
  save_matrix(l.matrix, require_out(o), manifest("distances", o, l.inputs));
}

BehaviorMatrix full_behavior(const DistanceMatrix& m) {
  return mask_columns(m, m.ids);
}

void run_steer(const Options& o) {
  const Loaded l = load_input(o, false);
  const EmbeddingModel model =
      build_embedding_model(full_behavior(l.matrix), steering_config(o), l.matrix.measure, l.matrix.codec, l.matrix.row_stats);
  json j = to_json(model);
  j["manifest"] = manifest("steer", o, l.inputs);
  write_file_atomic(require_out(o), j.dump(2) + "\n");
}

std::string csv_path(const Options& o) {
  if (!o.csv.empty()) return o.csv;
  fs::path p(require_out(o));
  p.replace_extension(".csv");
  return p.string();
}

void run_eval(const Options& o) {
  const Loaded l = load_input(o, true);
  const FoldPlan plan = make_folds(l.matrix, o.folds, o.seed);
  const EvalReport report = run_experiment(l.matrix, method_config(o), plan, {l.fold_standardize, o.workers});
  write_file_atomic(require_out(o), report_to_json(report, manifest("eval", o, l.inputs)).dump(2) + "\n");
  write_file_atomic(csv_path(o), report_csv_header() + report_csv_row(report));
}

void run_sweep(const Options& o) {
  const Loaded l = load_input(o, true);
  const fs::path dir = require_out(o);
  const ExperimentOptions eo{l.fold_standardize, o.workers};
  json tried = json::array();
  std::string csv = report_csv_header();
  auto emit = [&](const std::string& name, const EvalReport& r, const json& point) {
    const auto path = dir / (name + ".json");
    write_file_atomic(path, report_to_json(r).dump(2) + "\n");
    csv += report_csv_row(r);
    tried.push_back({{"point", point}, {"report", path.filename().string()}, {"test_f1_mean", r.test_f1_mean()}});
  };

  json summary = json::object();
  if (o.mode == "subsets") {
    const std::size_t classes = sorted_labels(l.matrix.labels).size();
    const std::size_t max = o.max_classes ? o.max_classes : classes - 1;
    const SubsetSweep sweep = class_subset_sweep(l.matrix, method_config(o), o.min_classes, max, o.folds, o.seed, eo);
    for (const auto& s : sweep.subsets) {
      std::string name = "subset";
      for (const auto& c : s.classes) name += "_" + c;
      emit(name, s.report, {{"classes", s.classes}});
    }
    for (const auto& [size, median] : sweep.median_test_f1) summary[std::to_string(size)] = median;
  } else if (o.mode == "grid") {
    const auto methods = o.grid_methods.empty() ? std::vector<std::string>{o.method} : o.grid_methods;
    const auto refs = o.grid_refs.empty() ? std::vector<std::size_t>{o.refs} : o.grid_refs;
    const auto policies = o.grid_policies.empty() ? std::vector<std::string>{o.policy} : o.grid_policies;
    const auto aggregates = o.grid_aggregates.empty() ? std::vector<std::string>{o.aggregate} : o.grid_aggregates;
    const FoldPlan plan = make_folds(l.matrix, o.folds, o.seed);
    std::size_t index = 0;
    for (const auto& m : methods)
      for (auto r : refs)
        for (const auto& p : policies)
          for (const auto& a : aggregates) {
            Options point = o;
            point.method = m;
            point.refs = r;
            point.policy = p;
            point.aggregate = a;
            const EvalReport rep = run_experiment(l.matrix, method_config(point), plan, eo);
            char name[32];
            std::snprintf(name, sizeof name, "point%04zu", index++);
            emit(name, rep, {{"method", m}, {"refs", r}, {"policy", p}, {"aggregate", a}});
          }
  } else {
    fail(Errc::invalid_input, "unknown sweep mode '" + o.mode + "'");
  }
  write_file_atomic(dir / "summary.csv", csv);
  json man = manifest("sweep", o, l.inputs);
  man["mode"] = o.mode;
  man["points"] = tried;
  if (!summary.empty()) man["median_test_f1_by_class_count"] = summary;
  write_file_atomic(dir / "manifest.json", man.dump(2) + "\n");
}

void run_tree(const Options& o) {
  const Loaded l = load_input(o, false);
  const fs::path dir = require_out(o);
  json index = json::array();
  for (const auto& ct : build_class_trees(full_behavior(l.matrix))) {
    write_file_atomic(dir / (ct.label + ".nwk"), to_newick(ct.tree) + "\n");
    json j = to_json(ct.tree);
    j["class"] = ct.label;
    write_file_atomic(dir / (ct.label + ".json"), j.dump(2) + "\n");
    index.push_back(ct.label);
  }
  json man = manifest("tree", o, l.inputs);
  man["classes"] = index;
  write_file_atomic(dir / "manifest.json", man.dump(2) + "\n");
}

void run_synth(const Options& o) {
  SyntheticSpec spec{o.synth_classes, o.synth_docs, o.synth_bytes, o.synth_weight, o.seed};
  const fs::path root = require_out(o);
  write_synthetic_corpus(root, spec);
  json man = {{"tool", "ctxsteer"},
              {"subcommand", "synth"},
              {"classes", spec.classes},
              {"docs_per_class", spec.docs_per_class},
              {"doc_bytes", spec.doc_bytes},
              {"class_weight", spec.class_weight},
              {"seed", spec.seed}};
  write_file_atomic(root / "synth.json", man.dump(2) + "\n");
}

void add_input_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--corpus", o.corpus, "Corpus root (<root>/<class>/<file>)");
  cmd->add_option("--matrix", o.matrix, "Distance matrix CSV with .meta.json sidecar");
  cmd->add_option("--encoding", o.encoding, "Payload encoding")->check(CLI::IsMember({"raw", "hex", "auto"}));
  cmd->add_option("--classes", o.classes, "Comma-separated class subset");
  cmd->add_option("--codec", o.codec, "Compressor")->check(CLI::IsMember({"deflate", "bzip2-class", "lzma", "rlz"}));
  cmd->add_option("--measure", o.measure, "Distance measure")->check(CLI::IsMember({"ncd", "nrc"}));
  cmd->add_option("--standardize", o.standardize, "none | pipeline | external:<stats.json>");
  cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Seed");
  cmd->add_option("--out", o.out, "Output path");
}

void add_steering_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--policy", o.policy, "top:<N> | above-avg");
  cmd->add_option("--refs", o.refs, "References per cluster")->check(CLI::PositiveNumber);
  cmd->add_option("--ref-strategy", o.ref_strategy, "Reference strategy")->check(CLI::IsMember({"centroid", "farthest"}));
  cmd->add_option("--aggregate", o.aggregate, "Feature aggregate")
      ->check(CLI::IsMember({"min", "max", "mean", "median", "l2"}));
  cmd->add_option("--weighting", o.weighting, "Weighting mode")->check(CLI::IsMember({"row", "distance"}));
  cmd->add_option("--silhouette-space", o.silhouette_space, "Partition scoring space")
      ->check(CLI::IsMember({"feature", "cophenetic"}));
}

void add_eval_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--method", o.method, "Context method")
      ->check(CLI::IsMember({"ours", "random", "dummy", "kbest-anova", "kbest-chi2", "kbest-mi", "knn"}));
  cmd->add_option("--folds", o.folds, "Fold count")->check(CLI::Range(2, 1000));
  cmd->add_option("--feature-count", o.feature_count, "Baseline feature count (0 = class count)");
  cmd->add_option("--knn-k", o.knn_k, "Neighbors for knn")->check(CLI::PositiveNumber);
  cmd->add_option("--iterations", o.iterations, "Repetitions of randomized baselines")->check(CLI::PositiveNumber);
  cmd->add_option("--trees", o.trees, "Forest size")->check(CLI::PositiveNumber);
}

void print_error(const std::string& command, const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}, {"subcommand", command}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context steering over compression-distance matrices"};
  app.set_config("--config", "", "TOML/INI config file; flags override it");
  app.require_subcommand(1);
  Options o;

  auto* distances = app.add_subcommand("distances", "Build a distance matrix from a corpus");
  add_input_options(distances, o);

  auto* steer = app.add_subcommand("steer", "Build an embedding model on all objects");
  add_input_options(steer, o);
  add_steering_options(steer, o);

  auto* eval = app.add_subcommand("eval", "Cross-validated evaluation of one method");
  add_input_options(eval, o);
  add_steering_options(eval, o);
  add_eval_options(eval, o);
  eval->add_option("--csv", o.csv, "CSV summary path (default: --out with .csv)");

  auto* sweep = app.add_subcommand("sweep", "Class-subset or parameter-grid sweep");
  add_input_options(sweep, o);
  add_steering_options(sweep, o);
  add_eval_options(sweep, o);
  sweep->add_option("--mode", o.mode, "subsets | grid")->check(CLI::IsMember({"subsets", "grid"}));
  sweep->add_option("--min-classes", o.min_classes, "Smallest subset size")->check(CLI::Range(2, 1000));
  sweep->add_option("--max-classes", o.max_classes, "Largest subset size (0 = classes - 1)");
  sweep->add_option("--grid-methods", o.grid_methods, "Methods to sweep")->delimiter(',');
  sweep->add_option("--grid-refs", o.grid_refs, "Reference counts to sweep")->delimiter(',');
  sweep->add_option("--grid-policies", o.grid_policies, "Policies to sweep")->delimiter(',');
  sweep->add_option("--grid-aggregates", o.grid_aggregates, "Aggregates to sweep")->delimiter(',');

  auto* tree = app.add_subcommand("tree", "Per-class dendrograms as Newick and JSON");
  add_input_options(tree, o);

  auto* synth = app.add_subcommand("synth", "Write a synthetic Markov-text corpus");
  synth->add_option("--classes", o.synth_classes, "Number of sources")->check(CLI::Range(1, 100));
  synth->add_option("--docs", o.synth_docs, "Documents per source")->check(CLI::PositiveNumber);
  synth->add_option("--bytes", o.synth_bytes, "Bytes per document")->check(CLI::PositiveNumber);
  synth->add_option("--class-weight", o.synth_weight, "Weight of the class-specific table")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--seed", o.seed, "Seed");
  synth->add_option("--out", o.out, "Output root")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "distances") run_distances(o);
    else if (command == "steer") run_steer(o);
    else if (command == "eval") run_eval(o);
    else if (command == "sweep") run_sweep(o);
    else if (command == "tree") run_tree(o);
    else if (command == "synth") run_synth(o);
  } catch (const Error& e) {
    print_error(command, std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(command, "InternalError", e.what());
    return 1;
  }
  return 0;
}
