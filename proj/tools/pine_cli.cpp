// Command-line front end: pine <command> [options].
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "pine.hpp"

namespace {

using json = nlohmann::json;
using namespace pine;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Helpers

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& err) {
    throw Error(Errc::ParseError, path + ": " + err.what());
  }
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::optional<std::string> label_of(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& flag, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || end != item.data() + item.size()) throw UsageError("--" + flag + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--" + flag + ": empty list");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || end != item.data() + item.size()) throw UsageError("--seeds: '" + item + "' is not a seed");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--seeds: empty list");
  return out;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError("--" + flag + " is required");
}

// Relabels a dataset by class name so that label indices agree with the
// ensemble's training labels even when a split lacks some classes.
Dataset align_labels(const Dataset& d, const json& model) {
  if (d.labels().empty() || !model.contains("class_names")) return d;
  const auto names = model.at("class_names").get<std::vector<std::string>>();
  std::vector<int> labels;
  for (int y : d.labels()) {
    const auto& name = d.class_names()[static_cast<std::size_t>(y)];
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(Errc::SchemaError, "class '" + name + "' unknown to the model");
    labels.push_back(static_cast<int>(it - names.begin()));
  }
  return Dataset(d.n_features(), d.values(), std::move(labels), d.features(), names);
}

struct LoadedModel {
  json raw;
  Ensemble ensemble;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel m{read_json(path), {}};
  m.ensemble = ensemble_from_json(m.raw);
  return m;
}

Dataset load_for(const std::string& path, const std::string& label, const LoadedModel& m) {
  return align_labels(load_csv(path, label_of(label)), m.raw);
}

void check_features(const Dataset& d, const Ensemble& e, const std::string& what) {
  if (d.n_features() != static_cast<std::size_t>(e.n_features))
    throw Error(Errc::DimensionMismatch, what + " has " + std::to_string(d.n_features()) + " features, the model " +
                                             std::to_string(e.n_features));
}

struct LoadedResult {
  std::vector<double> weights, original;
  Tau tau;
  std::optional<ScoreModel> score;
  std::optional<double> alpha;
  bool fipe = false;
  Region region() const { return score && !tau.is_infinite() ? Region{&*score, tau} : Region{}; }
};

LoadedResult load_result(const std::string& path) {
  const auto j = read_json(path);
  try {
    LoadedResult r;
    r.weights = j.at("weights").get<std::vector<double>>();
    r.original = j.at("original_weights").get<std::vector<double>>();
    r.tau = tau_from_json(j.at("tau"));
    r.fipe = j.at("mode") == "fipe";
    if (j.contains("score_model")) r.score = score_from_json(j.at("score_model"));
    if (j.contains("calibration")) r.alpha = j.at("calibration").at("alpha").get<double>();
    return r;
  } catch (const json::exception& err) {
    throw Error(Errc::SchemaError, path + ": " + err.what());
  }
}

// ---------------------------------------------------------------------------
// Config: {"command": name, "options": {flag: value}}. File values are
// inserted ahead of the command-line flags, which therefore override them.

json typed(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.empty()) return s;
  const char* last = s.data() + s.size();
  long long i = 0;
  if (auto [end, ec] = std::from_chars(s.data(), last, i); ec == std::errc{} && end == last) return i;
  double v = 0.0;
  if (auto [end, ec] = std::from_chars(s.data(), last, v); ec == std::errc{} && end == last) return v;
  return s;
}

bool is_flag(const CLI::Option* o) { return o->get_expected_min() == 0; }

json resolved_config(const CLI::App& sub) {
  json opts = json::object();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_single_name();
    if (name == "help" || name == "config") continue;
    if (is_flag(o)) {
      opts[name] = o->as<bool>();
      continue;
    }
    const std::string v = o->count() > 0 ? o->as<std::string>() : o->get_default_str();
    opts[name] = typed(v);
  }
  return {{"command", sub.get_name()}, {"options", opts}};
}

std::vector<std::string> config_args(const json& cfg, const CLI::App& sub, const std::string& path) {
  if (cfg.contains("command") && cfg.at("command") != sub.get_name())
    throw UsageError("--config: " + path + " is for '" + cfg.at("command").get<std::string>() + "'");
  const json& opts = cfg.contains("options") ? cfg.at("options") : cfg;
  std::vector<std::string> out;
  for (const auto& [key, value] : opts.items()) {
    if (key == "command") continue;
    const CLI::Option* o = sub.get_option_no_throw("--" + key);
    if (o == nullptr) throw UsageError("--config: unknown option '" + key + "' for " + sub.get_name());
    if (is_flag(o)) {
      out.push_back("--" + key + "=" + (value.get<bool>() ? "true" : "false"));
    } else if (value.is_string()) {
      out.push_back("--" + key);
      out.push_back(value.get<std::string>());
    } else {
      out.push_back("--" + key);
      out.push_back(value.dump());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

struct Cli {
  CLI::App app{"Prune boosted tree ensembles with exact equivalence certificates"};
  std::map<CLI::App*, std::function<void(const json&)>> handlers;

  // Shared option storage; each command reads only the fields it declares.
  std::string data, label = "label", out, model, result, fit, cal, test, score_model, calibration_path, dump;
  std::string kind = "moons", ratios = "0.64,0.16,0.20", names = "fit,cal,test", out_prefix, model_out;
  std::string score = "chowliu", objective = "l0", oracle_dump, results, selector = "empirical";
  std::string dataset = "moons", seeds = "0,1,2,3,4", alphas = "0.05,0.1,0.2,0.4,0.6,0.8";
  std::size_t n = 400, max_iterations = 10000, max_samples = 256, features = 0;
  int p = 3, bins_synth = 3, rounds = 30, max_depth = 2, bins = 4, if_trees = 30, classes = 2;
  double noise = 0.2, concentration = 1.0, learning_rate = 0.3, lambda = 1.0, subsample = 1.0, beta = 1.0;
  double alpha = 0.2, time_limit = 120.0, pruner_time_limit = 120.0, rho = 0.95, delta = 0.05, base_margin = 0.0;
  double cap = 1e7;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool fipe = false;

  Cli() {
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
    synth();
    split();
    train();
    fit_score();
    calibrate_cmd();
    prune();
    evaluate_cmd();
    select_alpha_cmd();
    verify();
    sweep();
    convert();
  }

  CLI::App* command(const std::string& name, const std::string& desc, std::function<void(const json&)> fn) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", "JSON config; command-line flags override it");
    handlers[sub] = std::move(fn);
    return sub;
  }

  void add_score_options(CLI::App* s) {
    s->add_option("--score", score, "chowliu|leafsupport|iforest|none");
    s->add_option("--bins", bins, "Chow-Liu bins per feature");
    s->add_option("--beta", beta, "Laplace smoothing");
    s->add_option("--if-trees", if_trees, "isolation trees");
    s->add_option("--max-samples", max_samples, "isolation subsample size");
  }

  ScoreParams score_params() const {
    ScoreParams sp;
    sp.kind = parse_score_kind(score);
    sp.bins = bins;
    sp.beta = beta;
    sp.if_trees = if_trees;
    sp.max_samples = max_samples;
    sp.seed = seed;
    return sp;
  }

  PineConfig pine_config() const {
    PineConfig c;
    c.fipe = fipe;
    c.alpha = alpha;
    c.score = score_params();
    c.pruner.objective = parse_objective(objective);
    c.pruner.limits.time_limit_s = pruner_time_limit;
    c.oracle.limits.time_limit_s = time_limit;
    c.oracle.threads = std::max(1u, threads);
    c.oracle.dump_prefix = oracle_dump;
    c.max_iterations = max_iterations;
    return c;
  }

  void synth() {
    auto* s = command("synth", "Generate a synthetic dataset", [this](const json& cfg) {
      require(out, "out");
      if (kind == "moons") {
        write_file(out, to_csv(gen_moons({n, noise, seed})));
      } else if (kind == "treedist") {
        TreeDistSpec spec;
        spec.p = p;
        spec.B = bins_synth;
        spec.concentration = concentration;
        spec.n = n;
        spec.seed = seed;
        const auto sample = gen_tree_dist(spec);
        write_file(out, to_csv(sample.data));
        if (!model_out.empty()) write_json(model_out, {{"config", cfg}, {"model", score_to_json(sample.model)}});
      } else {
        throw UsageError("--kind: expected moons or treedist, got '" + kind + "'");
      }
    });
    s->add_option("--kind", kind, "moons|treedist");
    s->add_option("--n", n, "rows");
    s->add_option("--noise", noise, "moons noise level");
    s->add_option("--p", p, "treedist features");
    s->add_option("--bins", bins_synth, "treedist categories per feature");
    s->add_option("--concentration", concentration, "treedist Dirichlet concentration");
    s->add_option("--seed", seed, "random seed");
    s->add_option("--out", out, "output CSV");
    s->add_option("--model-out", model_out, "treedist generating model JSON");
  }

  void split() {
    auto* s = command("split", "Split a CSV into seeded partitions", [this](const json& cfg) {
      require(data, "data");
      require(out_prefix, "out-prefix");
      const auto r = parse_doubles("ratios", ratios);
      const auto nm = split_list(names);
      if (nm.size() != r.size()) throw UsageError("--names: need one name per ratio");
      const auto d = load_csv(data, label_of(label));
      const SplitSpec spec{r, seed};
      const auto parts = pine::split(d, spec);
      for (std::size_t i = 0; i < parts.size(); ++i) write_file(out_prefix + "_" + nm[i] + ".csv", to_csv(parts[i], label));
      auto manifest = split_manifest(d.n_rows(), spec);
      manifest["names"] = nm;
      manifest["config"] = cfg;
      write_json(out_prefix + "_manifest.json", manifest);
    });
    s->add_option("--data", data, "input CSV");
    s->add_option("--label", label, "label column (empty for none)");
    s->add_option("--ratios", ratios, "comma-separated partition ratios");
    s->add_option("--names", names, "comma-separated partition names");
    s->add_option("--seed", seed, "shuffle seed");
    s->add_option("--out-prefix", out_prefix, "writes <prefix>_<name>.csv and <prefix>_manifest.json");
  }

  void train() {
    auto* s = command("train", "Train a boosted tree ensemble", [this](const json& cfg) {
      require(data, "data");
      require(out, "out");
      const auto d = load_csv(data, label_of(label));
      TrainParams tp;
      tp.rounds = rounds;
      tp.max_depth = max_depth;
      tp.learning_rate = learning_rate;
      tp.lambda = lambda;
      tp.subsample = subsample;
      tp.seed = seed;
      auto j = ensemble_to_json(train_boosted(d, tp));
      j["class_names"] = d.class_names();
      j["config"] = cfg;
      write_json(out, j);
    });
    s->add_option("--data", data, "training CSV");
    s->add_option("--label", label, "label column");
    s->add_option("--rounds", rounds, "boosting rounds");
    s->add_option("--max-depth", max_depth, "tree depth");
    s->add_option("--learning-rate", learning_rate, "shrinkage");
    s->add_option("--lambda", lambda, "L2 leaf penalty");
    s->add_option("--subsample", subsample, "row fraction per round");
    s->add_option("--seed", seed, "random seed");
    s->add_option("--out", out, "ensemble JSON");
  }

  void fit_score() {
    auto* s = command("fit-score", "Fit a plausibility score model", [this](const json& cfg) {
      require(model, "model");
      require(data, "data");
      require(out, "out");
      const auto m = load_model(model);
      const auto d = load_for(data, label, m);
      check_features(d, m.ensemble, data);
      write_json(out, {{"config", cfg}, {"model", score_to_json(pine::fit_score(m.ensemble, d, score_params()))}});
    });
    s->add_option("--model", model, "ensemble JSON");
    s->add_option("--data", data, "fit CSV");
    s->add_option("--label", label, "label column (empty for none)");
    add_score_options(s);
    s->add_option("--seed", seed, "isolation forest seed");
    s->add_option("--out", out, "score model JSON");
  }

  static ScoreModel score_file(const std::string& path) {
    const auto j = read_json(path);
    return score_from_json(j.contains("model") ? j.at("model") : j);
  }

  void calibrate_cmd() {
    auto* s = command("calibrate", "Conformal threshold from calibration scores", [this](const json& cfg) {
      require(score_model, "score-model");
      require(data, "data");
      require(out, "out");
      const auto sm = score_file(score_model);
      const auto d = load_csv(data, label_of(label));
      std::vector<double> scores;
      for (std::size_t i = 0; i < d.n_rows(); ++i) scores.push_back(pine::score(sm, d.row(i)));
      auto j = calibration_to_json(pine::calibrate(scores, alpha));
      j["config"] = cfg;
      write_json(out, j);
    });
    s->add_option("--score-model", score_model, "score model JSON");
    s->add_option("--data", data, "calibration CSV");
    s->add_option("--label", label, "label column (empty for none)");
    s->add_option("--alpha", alpha, "miscoverage level");
    s->add_option("--out", out, "calibration JSON");
  }

  void prune() {
    auto* s = command("prune", "Prune with an equivalence certificate", [this](const json& cfg) {
      require(model, "model");
      require(fit, "fit");
      require(out, "out");
      const auto m = load_model(model);
      const auto f = load_for(fit, label, m);
      check_features(f, m.ensemble, fit);
      const auto pc = pine_config();
      PruneResult r;
      if (fipe) {
        r = run_fipe(m.ensemble, f, pc);
      } else if (!score_model.empty()) {
        const auto sm = score_file(score_model);
        Tau tau;
        if (!calibration_path.empty()) {
          tau = tau_from_json(read_json(calibration_path).at("tau"));
        } else {
          require(cal, "cal");
          const auto c = load_for(cal, label, m);
          std::vector<double> scores;
          for (std::size_t i = 0; i < c.n_rows(); ++i) scores.push_back(pine::score(sm, c.row(i)));
          tau = pine::calibrate(scores, alpha).tau;
        }
        r = run_with_region(m.ensemble, f, sm, tau, pc);
      } else {
        require(cal, "cal");
        const auto c = load_for(cal, label, m);
        check_features(c, m.ensemble, cal);
        r = run(m.ensemble, f, c, pc);
      }
      auto j = prune_result_to_json(r);
      j["config"] = cfg;
      write_json(out, j);
      log::info("kept " + std::to_string(r.kept()) + " of " + std::to_string(r.weights.size()) + " trees, scope " +
                scope_name(r.scope));
    });
    s->add_option("--model", model, "ensemble JSON");
    s->add_option("--fit", fit, "fit CSV (warm start, score fitting)");
    s->add_option("--cal", cal, "calibration CSV");
    s->add_option("--label", label, "label column (empty for none)");
    s->add_option("--alpha", alpha, "miscoverage level");
    s->add_flag("--fipe", fipe, "full-space pruning (tau = +inf)");
    add_score_options(s);
    s->add_option("--score-model", score_model, "use a saved score model instead of fitting one");
    s->add_option("--calibration", calibration_path, "use a saved calibration instead of --cal");
    s->add_option("--seed", seed, "isolation forest seed");
    s->add_option("--objective", objective, "l0|l1");
    s->add_option("--oracle-dump", oracle_dump, "write each Oracle MILP as <prefix>_<c>_<c'>.lp/.json");
    s->add_option("--threads", threads, "class pairs solved concurrently");
    s->add_option("--time-limit", time_limit, "seconds per Oracle MILP");
    s->add_option("--pruner-time-limit", pruner_time_limit, "seconds per Pruner solve");
    s->add_option("--max-iterations", max_iterations, "Oracle call cap");
    s->add_option("--out", out, "PruneResult JSON");
  }

  void evaluate_cmd() {
    auto* s = command("evaluate", "Fidelity, coverage and pruning metrics", [this](const json& cfg) {
      require(model, "model");
      require(result, "result");
      require(data, "data");
      require(out, "out");
      const auto m = load_model(model);
      const auto r = load_result(result);
      const auto d = load_for(data, label, m);
      check_features(d, m.ensemble, data);
      auto j = eval_report_to_json(evaluate(m.ensemble, r.original, r.weights, d, r.region()));
      j["config"] = cfg;
      write_json(out, j);
    });
    s->add_option("--model", model, "ensemble JSON");
    s->add_option("--result", result, "PruneResult JSON");
    s->add_option("--data", data, "test CSV");
    s->add_option("--label", label, "label column (empty for none)");
    s->add_option("--out", out, "report JSON");
  }

  void select_alpha_cmd() {
    auto* s = command("select-alpha", "Choose alpha on a selection split", [this](const json& cfg) {
      require(model, "model");
      require(results, "results");
      require(data, "data");
      require(out, "out");
      const auto m = load_model(model);
      const auto d = load_for(data, label, m);
      check_features(d, m.ensemble, data);
      std::vector<AlphaCandidate> cands;
      for (const auto& path : split_list(results)) {
        const auto r = load_result(path);
        if (!r.alpha) throw UsageError("--results: " + path + " has no calibrated alpha");
        cands.push_back({*r.alpha, mismatch_count(m.ensemble, r.original, r.weights, d), d.n_rows()});
      }
      std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
      const AlphaSelection sel{rho, parse_selector(selector), delta};
      auto j = alpha_choice_to_json(select_alpha(cands, sel), cands, sel);
      j["config"] = cfg;
      write_json(out, j);
    });
    s->add_option("--model", model, "ensemble JSON");
    s->add_option("--results", results, "comma-separated PruneResult JSON files, one per alpha");
    s->add_option("--data", data, "selection CSV");
    s->add_option("--label", label, "label column (empty for none)");
    s->add_option("--rho", rho, "target fidelity");
    s->add_option("--selector", selector, "empirical|confidence_bound");
    s->add_option("--delta", delta, "failure probability");
    s->add_option("--out", out, "choice JSON");
  }

  void verify() {
    auto* s = command("verify", "Exhaustively check a pruning certificate", [this](const json& cfg) {
      require(model, "model");
      require(result, "result");
      require(out, "out");
      const auto m = load_model(model);
      const auto r = load_result(result);
      const auto region = r.region();
      const auto cells = check_equivalence_exhaustive(m.ensemble, r.original, r.weights, region, cap);
      json j;
      j["equivalent"] = cells.empty();
      j["cells_total"] = CellIterator(augmented_index(m.ensemble, region)).total();
      j["region"] = region.active() ? "in-distribution" : "full-space";
      j["tau"] = tau_to_json(r.tau);
      j["n_disagreements"] = cells.size();
      auto& list = j["disagreements"] = json::array();
      for (const auto& c : cells) list.push_back(disagreement_to_json(c));
      if (r.score && !r.tau.is_infinite())
        if (const auto* cl = std::get_if<ChowLiuModel>(&*r.score))
          j["state_bound"] = state_bound_to_json(check_state_bound(*cl, r.tau.value()));
      j["config"] = cfg;
      write_json(out, j);
      if (!cells.empty()) log::warn(std::to_string(cells.size()) + " disagreeing cells");
    });
    s->add_option("--model", model, "ensemble JSON");
    s->add_option("--result", result, "PruneResult JSON");
    s->add_option("--cap", cap, "maximum cell count");
    s->add_option("--out", out, "verdict JSON");
  }

  void sweep() {
    auto* s = command("sweep", "Seed x alpha x mode sweep written as CSV rows", [this](const json& cfg) {
      require(out, "out");
      const auto seed_list = parse_seeds(seeds);
      const auto alpha_list = parse_doubles("alphas", alphas);
      struct Prepared {
        Ensemble e;
        Dataset fit, cal, test;
      };
      std::vector<Prepared> prep;
      for (auto sd : seed_list) {
        const Dataset all = dataset == "moons" ? gen_moons({n, noise, sd}) : load_csv(dataset, label_of(label));
        auto parts = pine::split(all, {{0.64, 0.16, 0.20}, sd});
        TrainParams tp;
        tp.rounds = rounds;
        tp.max_depth = max_depth;
        tp.learning_rate = learning_rate;
        tp.seed = sd;
        auto e = train_boosted(parts[0], tp);
        prep.push_back({std::move(e), std::move(parts[0]), std::move(parts[1]), std::move(parts[2])});
      }
      struct Job {
        std::size_t s;
        std::optional<double> alpha;  // none for the full-space run
      };
      std::vector<Job> jobs;
      for (std::size_t i = 0; i < seed_list.size(); ++i) {
        jobs.push_back({i, std::nullopt});
        for (double a : alpha_list) jobs.push_back({i, a});
      }
      std::vector<std::string> rows(jobs.size());
      std::vector<std::string> errors(jobs.size());
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t k; (k = next++) < jobs.size();) {
          const auto& job = jobs[k];
          const auto& pr = prep[job.s];
          try {
            PineConfig pc = pine_config();
            pc.oracle.threads = 1;
            pc.oracle.dump_prefix.clear();
            pc.fipe = !job.alpha;
            if (job.alpha) pc.alpha = *job.alpha;
            const auto r = job.alpha ? run(pr.e, pr.fit, pr.cal, pc) : run_fipe(pr.e, pr.fit, pc);
            const auto rep = evaluate(pr.e, r.original_weights, r.weights, pr.test, r.region());
            std::ostringstream line;
            line.precision(10);
            line << (dataset == "moons" ? "moons" : std::filesystem::path(dataset).stem().string()) << ','
                 << seed_list[job.s] << ',' << (job.alpha ? "pine" : "fipe") << ','
                 << (job.alpha ? std::to_string(*job.alpha) : std::string("")) << ','
                 << (r.tau.is_infinite() ? std::string("+inf") : std::to_string(r.tau.value())) << ','
                 << rep.n_trees << ',' << rep.kept << ',' << rep.pruning_rate << ',' << rep.fidelity << ','
                 << rep.coverage << ',' << (rep.fidelity_id ? std::to_string(*rep.fidelity_id) : "undefined") << ','
                 << rep.n << ',' << rep.matches << ',' << rep.in_region << ',' << rep.in_region_matches << ','
                 << rep.accuracy_original.value_or(0.0) << ',' << rep.accuracy_pruned.value_or(0.0) << ','
                 << (r.certified ? "true" : "false") << ',' << scope_name(r.scope) << ',' << r.iterations << ','
                 << r.wall_time_s;
            rows[k] = line.str();
          } catch (const std::exception& err) {
            errors[k] = err.what();
          }
        }
      };
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
      for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
      const bool fresh = !std::filesystem::exists(out) || std::filesystem::file_size(out) == 0;
      std::ofstream f(out, std::ios::app);
      if (!f) throw Error(Errc::IoError, "cannot open " + out);
      if (fresh)
        f << "dataset,seed,method,alpha,tau,n_trees,kept,pruning_rate,fidelity,coverage,fidelity_id,n_test,matches,"
             "in_region,in_region_matches,accuracy_original,accuracy_pruned,certified,guarantee_scope,iterations,"
             "wall_time_s\n";
      for (const auto& r : rows) f << r << '\n';
      write_json(out + ".config.json", cfg);
    });
    s->add_option("--dataset", dataset, "moons or a CSV path");
    s->add_option("--label", label, "label column for CSV datasets");
    s->add_option("--n", n, "moons rows");
    s->add_option("--noise", noise, "moons noise level");
    s->add_option("--seeds", seeds, "comma-separated seeds");
    s->add_option("--alphas", alphas, "comma-separated alpha grid");
    add_score_options(s);
    s->add_option("--rounds", rounds, "boosting rounds");
    s->add_option("--max-depth", max_depth, "tree depth");
    s->add_option("--learning-rate", learning_rate, "shrinkage");
    s->add_option("--objective", objective, "l0|l1");
    s->add_option("--threads", threads, "concurrent jobs");
    s->add_option("--time-limit", time_limit, "seconds per Oracle MILP");
    s->add_option("--pruner-time-limit", pruner_time_limit, "seconds per Pruner solve");
    s->add_option("--max-iterations", max_iterations, "Oracle call cap");
    s->add_option("--out", out, "CSV appended to; config goes to <out>.config.json");
  }

  void convert() {
    auto* s = command("convert", "Import a boosted-tree text dump", [this](const json& cfg) {
      require(dump, "dump");
      require(out, "out");
      if (features < 1) throw UsageError("--features must be positive");
      auto j = ensemble_to_json(convert_text_dump(read_file(dump), static_cast<int>(features), classes, base_margin));
      j["config"] = cfg;
      write_json(out, j);
    });
    s->add_option("--dump", dump, "text dump file");
    s->add_option("--features", features, "feature count");
    s->add_option("--classes", classes, "class count");
    s->add_option("--base-margin", base_margin, "global bias");
    s->add_option("--out", out, "ensemble JSON");
  }
};

// Finds the subcommand token and any --config path.
std::pair<std::size_t, std::string> scan(const std::vector<std::string>& args) {
  std::size_t sub = 0;
  std::string config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (sub == 0 && !args[i].empty() && args[i][0] != '-') sub = i;
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  return {sub, config};
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  std::vector<std::string> args(argv, argv + argc);
  try {
    const auto [sub_at, config_path] = scan(args);
    if (!config_path.empty() && sub_at > 0) {
      const CLI::App* sub = cli.app.get_subcommand_no_throw(args[sub_at]);
      if (sub == nullptr) throw UsageError("unknown command '" + args[sub_at] + "'");
      json cfg;
      try {
        cfg = json::parse(read_file(config_path));
      } catch (const std::exception& err) {
        throw UsageError("--config: " + std::string(err.what()));
      }
      // Any output file works as a config through its embedded echo.
      if (cfg.is_object() && !cfg.contains("command") && cfg.contains("config")) cfg = cfg.at("config");
      const auto extra = config_args(cfg, *sub, config_path);
      args.insert(args.begin() + static_cast<long>(sub_at) + 1, extra.begin(), extra.end());
    }
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    cli.app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  for (auto& [sub, fn] : cli.handlers) {
    if (!sub->parsed()) continue;
    try {
      fn(resolved_config(*sub));
      return 0;
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << '\n';
      return 2;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}
