// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bncrowd/core.hpp"
#include "bncrowd/eval.hpp"
#include "bncrowd/io.hpp"
#include "bncrowd/model.hpp"
#include "bncrowd/sampler.hpp"
#include "bncrowd/synthgen.hpp"

namespace bncrowd {

inline constexpr const char* kVersion = "0.1.0";

/// Seed for an independent sub-stream identified by a tuple of tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32)};
  for (std::uint64_t t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

// ---------------------------------------------------------------------------
// Sparsity sweeps

struct SweepPlan {
  std::vector<ModelKind> models;
  std::vector<double> sparsities;
  std::size_t replicates = 50;
  std::uint64_t seed = 0;
  Hyperparameters hypers;
  ChainConfig chain;  // seed field ignored; each chain gets a derived seed
  std::size_t jobs = 1;
};

struct SweepRun {
  RunResult result;
  std::optional<double> mean_n_clusters;  // clustered models only
};

inline std::vector<double> default_sparsity_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 6; ++k) g.push_back((825.0 + 25.0 * k) / 1000.0);
  return g;
}

/// One chain (or vote) on one masked matrix, scored against gold.
inline SweepRun run_method(ModelKind model, const LabelMatrix& labels, const GroundTruth& gold,
                           const Hyperparameters& h, const ChainConfig& chain) {
  SweepRun run;
  run.result.method = std::string(to_string(model));
  if (model == ModelKind::MajorityVote) {
    Rng rng = make_rng(chain.seed, 0);
    run.result.accuracy = accuracy(majority_vote(labels, rng), gold);
    return run;
  }
  const auto samples = run_chain(model, labels, h, chain);
  const PosteriorSummary s = summarize(samples, labels, h, gold);
  run.result.accuracy = *s.accuracy;
  if (model != ModelKind::IBCC) run.mean_n_clusters = s.mean_n_clusters;
  return run;
}

/// Masks `dense` at every (sparsity, replicate) cell and runs every model on
/// the same masked matrix. Results are ordered by (sparsity, replicate,
/// model) regardless of `jobs`.
inline std::vector<SweepRun> run_sweep(const LabelMatrix& dense, const GroundTruth& gold,
                                       const SweepPlan& plan) {
  validate_truth(gold, dense.n_instances(), dense.n_categories());
  if (plan.models.empty()) throw UsageError("sweep: no models");
  if (plan.sparsities.empty()) throw UsageError("sweep: empty sparsity grid");
  if (plan.replicates == 0) throw UsageError("sweep: replicates must be positive");
  for (ModelKind m : plan.models) {
    if (m != ModelKind::MajorityVote) check_chain_inputs(m, dense, plan.hypers, plan.chain);
  }
  const std::size_t n_cells = plan.sparsities.size() * plan.replicates;
  const std::size_t n_models = plan.models.size();
  std::vector<SweepRun> out(n_cells * n_models);
  std::vector<LabelMatrix> masked(n_cells);
  // Masking errors surface before any chain runs.
  for (std::size_t s = 0; s < plan.sparsities.size(); ++s) {
    for (std::size_t r = 0; r < plan.replicates; ++r) {
      masked[s * plan.replicates + r] =
          mask(dense, plan.sparsities[s], derive_seed(plan.seed, {1, s, r}));
    }
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= out.size()) return;
      const std::size_t cell = k / n_models;
      const std::size_t mi = k % n_models;
      const std::size_t s = cell / plan.replicates;
      const std::size_t r = cell % plan.replicates;
      try {
        ChainConfig cfg = plan.chain;
        cfg.seed = derive_seed(plan.seed, {2, s, r, static_cast<std::uint64_t>(plan.models[mi])});
        SweepRun run = run_method(plan.models[mi], masked[cell], gold, plan.hypers, cfg);
        run.result.sparsity = plan.sparsities[s];
        run.result.replicate = r;
        out[k] = std::move(run);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(out.size());
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(plan.jobs, out.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace cli {

using nlohmann::json;

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw RuntimeError("sha256: digest initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  }
  return hex.str();
}

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)),
        start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& role, const std::string& path) {
    inputs_.push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
  }
  void set_config(json cfg) { config_ = std::move(cfg); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void output(const std::string& name) { outputs_.push_back(name); }

  void write(const std::filesystem::path& dir) const {
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["config"] = config_;
    j["seed"] = seed_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["software_version"] = kVersion;
    j["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto out = io::detail::open_output((dir / "manifest.json").string());
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

namespace detail {

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw RuntimeError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

template <class WriteFn>
void write_file(const std::filesystem::path& dir, const std::string& name, Manifest& manifest,
                WriteFn&& fn) {
  auto out = io::detail::open_output((dir / name).string());
  fn(out);
  if (!out) throw RuntimeError("write failed: " + (dir / name).string());
  manifest.output(name);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = io::detail::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
}

// Chain flags shared by infer and sweep.
struct ChainFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t iters = 0;
  std::size_t burnin = 0;
  std::size_t aux = 0;
  std::size_t alpha_subiters = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
  CLI::Option* burnin_opt = nullptr;
  CLI::Option* aux_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file of hyperparameters and chain settings");
    seed_opt = app->add_option("--seed", seed, "random seed (overrides the config file)");
    iters_opt = app->add_option("--iters", iters, "number of Gibbs sweeps");
    burnin_opt = app->add_option("--burnin", burnin, "sweeps discarded before recording");
    aux_opt = app->add_option("--aux-clusters", aux, "auxiliary empty clusters (hcbcc)");
    alpha_opt = app->add_option("--alpha-subiters", alpha_subiters,
                                "concentration updates per sweep (0 keeps it fixed)");
  }

  io::RunConfig resolve(int n_categories, Manifest& manifest) const {
    json cfg = json::object();
    if (!config_path.empty()) {
      cfg = io::read_json_file(config_path);
      manifest.input("config", config_path);
    }
    io::RunConfig rc = io::resolve_config(cfg, n_categories);
    if (seed_opt->count()) rc.chain.seed = seed;
    if (iters_opt->count()) rc.chain.n_iterations = iters;
    if (burnin_opt->count()) rc.chain.burn_in = burnin;
    if (aux_opt->count()) rc.chain.h_aux_clusters = aux;
    if (alpha_opt->count()) rc.chain.alpha_subiterations = alpha_subiters;
    rc.hypers.validate();
    manifest.set_config(io::to_json(rc));
    manifest.set_seed(rc.chain.seed);
    return rc;
  }
};

inline json summary_json(ModelKind model, const PosteriorSummary& s, const io::AnnotationData& d) {
  json j;
  j["model"] = std::string(to_string(model));
  j["n_instances"] = d.labels.n_instances();
  j["n_users"] = d.labels.n_users();
  j["n_categories"] = d.labels.n_categories();
  j["n_samples"] = s.n_samples;
  if (s.accuracy) j["accuracy"] = *s.accuracy;
  if (model != ModelKind::MajorityVote) {
    j["mean_n_clusters"] = s.mean_n_clusters;
    j["sd_n_clusters"] = s.sd_n_clusters;
    j["mean_alpha"] = s.mean_alpha;
    j["reference_iteration"] = s.reference_iteration;
    json clusters = json::array();
    for (const auto& p : s.cluster_profiles) {
      json members = json::array();
      for (std::size_t l : p.members) members.push_back(d.users[l]);
      clusters.push_back({{"id", p.id},
                          {"members", members},
                          {"share", p.share},
                          {"confusion", io::detail::to_json(p.confusion)}});
    }
    j["clusters"] = clusters;
  }
  json zhat = json::object();
  for (std::size_t i = 0; i < s.z_hat.size(); ++i) zhat[d.instances[i]] = s.z_hat[i] + 1;
  j["z_hat"] = zhat;
  return j;
}

inline PosteriorSummary vote_summary(const io::AnnotationData& d, const GroundTruth& z,
                                     const std::optional<GroundTruth>& gold) {
  PosteriorSummary s;
  const LabelMatrix& y = d.labels;
  s.z_hat = z;
  s.z_marginals = Eigen::MatrixXd::Zero(y.n_instances(), y.n_categories());
  for (std::size_t i = 0; i < y.n_instances(); ++i) {
    const auto row = y.instance_labels(i);
    for (const auto& e : row) s.z_marginals(i, e.label) += 1.0 / static_cast<double>(row.size());
  }
  if (gold) s.accuracy = accuracy(z, *gold);
  return s;
}

// ---------------------------------------------------------------------------
// Commands

struct SimulateArgs {
  std::string preset;
  std::string scale = "desk";
  std::string spec_path;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<double> sparsity;
  double sparsity_value = 0.0;
};

inline int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv,
                        std::ostream& log) {
  Manifest manifest("simulate", argv);
  if (a.preset.empty() == a.spec_path.empty()) {
    throw UsageError("simulate: give exactly one of --preset or --spec");
  }
  PopulationSpec spec;
  if (!a.preset.empty()) {
    spec = preset(a.preset, parse_preset_scale(a.scale));
  } else {
    spec = io::population_from_json(io::read_json_file(a.spec_path));
    manifest.input("spec", a.spec_path);
  }
  json cfg = {{"population", io::to_json(spec)}};
  if (a.sparsity) cfg["sparsity"] = *a.sparsity;
  manifest.set_config(cfg);
  manifest.set_seed(a.seed);

  const SimulatedData data = simulate(spec, derive_seed(a.seed, {0}));
  LabelMatrix labels = data.labels;
  if (a.sparsity) labels = mask(labels, *a.sparsity, derive_seed(a.seed, {1}));
  const io::IdMap instances = io::IdMap::numbered("i", spec.n_instances);
  const io::IdMap users = io::IdMap::numbered("u", spec.n_users);
  const auto dir = prepare_out(a.out);
  write_file(dir, "annotations.csv", manifest,
             [&](std::ostream& o) { io::write_annotations(o, labels, instances, users); });
  write_file(dir, "gold.csv", manifest,
             [&](std::ostream& o) { io::write_id_labels(o, data.z, instances); });
  write_file(dir, "clusters.csv", manifest, [&](std::ostream& o) {
    o << "user_id,cluster\n";
    for (std::size_t l = 0; l < users.size(); ++l) {
      o << users[l] << ',' << spec.clusters[data.user_cluster[l]].name << '\n';
    }
  });
  write_file(dir, "confusion.csv", manifest, [&](std::ostream& o) {
    o << "user_id,true_label,label,prob\n";
    for (std::size_t l = 0; l < users.size(); ++l) {
      const auto& m = data.confusion[l];
      for (Eigen::Index t = 0; t < m.rows(); ++t) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          o << users[l] << ',' << t + 1 << ',' << c + 1 << ',' << io::format_double(m(t, c))
            << '\n';
        }
      }
    }
  });
  write_file(dir, "population.json", manifest,
             [&](std::ostream& o) { o << io::to_json(spec).dump(2) << '\n'; });
  manifest.write(dir);
  log << "simulate: " << spec.n_instances << " instances, " << spec.n_users << " users, "
      << labels.size() << " annotations -> " << a.out << '\n';
  return 0;
}

struct InferArgs {
  std::string annotations;
  std::string gold;
  std::string model = "hcbcc";
  std::string out;
  int categories = 0;
  ChainFlags chain;
};

inline int cmd_infer(const InferArgs& a, const std::vector<std::string>& argv, std::ostream& log) {
  Manifest manifest("infer", argv);
  const ModelKind model = parse_model_kind(a.model);
  std::optional<int> categories;
  if (a.categories > 0) categories = a.categories;
  const io::AnnotationData d = io::read_annotations_file(a.annotations, categories);
  manifest.input("annotations", a.annotations);
  const io::RunConfig rc = a.chain.resolve(d.labels.n_categories(), manifest);
  std::optional<GroundTruth> gold;
  if (!a.gold.empty()) {
    auto in = io::detail::open_input(a.gold);
    gold = io::join_labels(d.instances, io::read_id_labels(in, a.gold, d.labels.n_categories()),
                           a.gold);
    manifest.input("gold", a.gold);
  }

  PosteriorSummary s;
  std::vector<SampleRecord> samples;
  if (model == ModelKind::MajorityVote) {
    Rng rng = make_rng(rc.chain.seed, 0);
    s = vote_summary(d, majority_vote(d.labels, rng), gold);
  } else {
    samples = run_chain(model, d.labels, rc.hypers, rc.chain);
    s = summarize(samples, d.labels, rc.hypers, gold);
  }

  const auto dir = prepare_out(a.out);
  const int C = d.labels.n_categories();
  write_file(dir, "summary.json", manifest,
             [&](std::ostream& o) { o << summary_json(model, s, d).dump(2) << '\n'; });
  write_file(dir, "z_hat.csv", manifest, [&](std::ostream& o) {
    o << "instance_id,label";
    for (int t = 1; t <= C; ++t) o << ",p_" << t;
    o << '\n';
    for (std::size_t i = 0; i < s.z_hat.size(); ++i) {
      o << d.instances[i] << ',' << s.z_hat[i] + 1;
      for (int t = 0; t < C; ++t) o << ',' << io::format_double(s.z_marginals(i, t));
      o << '\n';
    }
  });
  if (model != ModelKind::MajorityVote) {
    write_file(dir, "cooccurrence.csv", manifest, [&](std::ostream& o) {
      o << "user_id";
      for (std::size_t l = 0; l < d.users.size(); ++l) o << ',' << d.users[l];
      o << '\n';
      for (std::size_t l = 0; l < d.users.size(); ++l) {
        o << d.users[l];
        for (std::size_t k = 0; k < d.users.size(); ++k) {
          o << ',' << io::format_double(s.cooccurrence(l, k));
        }
        o << '\n';
      }
    });
    write_file(dir, "trace.csv", manifest, [&](std::ostream& o) {
      o << "iteration,n_clusters,alpha,log_joint\n";
      for (const auto& r : samples) {
        o << r.iteration << ',' << r.partition.n_clusters() << ',' << io::format_double(r.alpha)
          << ',' << io::format_double(r.log_joint) << '\n';
      }
    });
  }
  manifest.write(dir);
  log << "infer: " << a.model << " on " << d.labels.n_instances() << " instances, "
      << d.labels.n_users() << " users";
  if (s.accuracy) log << ", accuracy " << io::format_double(*s.accuracy);
  log << " -> " << a.out << '\n';
  return 0;
}

struct SweepArgs {
  std::string annotations;
  std::string gold;
  std::string preset;
  std::string scale = "desk";
  std::string models = "mv,ibcc,cbcc,hcbcc";
  std::string sparsity;
  std::size_t replicates = 50;
  std::size_t jobs = 1;
  std::string out;
  int categories = 0;
  ChainFlags chain;
};

inline int cmd_sweep(const SweepArgs& a, const std::vector<std::string>& argv, std::ostream& log) {
  Manifest manifest("sweep", argv);
  const bool from_files = !a.annotations.empty() || !a.gold.empty();
  if (from_files == !a.preset.empty()) {
    throw UsageError("sweep: give either --annotations with --gold, or --preset");
  }
  if (from_files && (a.annotations.empty() || a.gold.empty())) {
    throw UsageError("sweep: --annotations and --gold go together");
  }
  SweepPlan plan;
  for (const auto& m : split_list(a.models)) plan.models.push_back(parse_model_kind(m));
  if (a.sparsity.empty()) {
    plan.sparsities = default_sparsity_grid();
  } else {
    for (const auto& s : split_list(a.sparsity)) plan.sparsities.push_back(parse_double(s, "--sparsity"));
  }
  plan.replicates = a.replicates;
  plan.jobs = a.jobs;

  LabelMatrix dense;
  GroundTruth gold;
  std::optional<PopulationSpec> spec;
  if (from_files) {
    std::optional<int> categories;
    if (a.categories > 0) categories = a.categories;
    const io::AnnotationData d = io::read_annotations_file(a.annotations, categories);
    manifest.input("annotations", a.annotations);
    auto in = io::detail::open_input(a.gold);
    gold = io::join_labels(d.instances, io::read_id_labels(in, a.gold, d.labels.n_categories()),
                           a.gold);
    manifest.input("gold", a.gold);
    dense = d.labels;
  }
  const int C = from_files ? dense.n_categories()
                           : preset(a.preset, parse_preset_scale(a.scale)).n_categories;
  const io::RunConfig rc = a.chain.resolve(C, manifest);
  plan.seed = rc.chain.seed;
  plan.hypers = rc.hypers;
  plan.chain = rc.chain;
  if (!from_files) {
    spec = preset(a.preset, parse_preset_scale(a.scale));
    const SimulatedData data = simulate(*spec, derive_seed(plan.seed, {0}));
    dense = data.labels;
    gold = data.z;
  }
  {
    // Record the experiment design next to the chain settings.
    json cfg = io::to_json(rc);
    json models = json::array();
    for (ModelKind m : plan.models) models.push_back(std::string(to_string(m)));
    cfg["models"] = models;
    cfg["sparsity"] = plan.sparsities;
    cfg["replicates"] = plan.replicates;
    if (spec) cfg["population"] = io::to_json(*spec);
    manifest.set_config(cfg);
  }

  const auto runs = run_sweep(dense, gold, plan);
  std::vector<RunResult> results;
  for (const auto& r : runs) results.push_back(r.result);
  // Improvements are measured against majority voting when it was run.
  const bool has_mv = std::find(plan.models.begin(), plan.models.end(),
                                ModelKind::MajorityVote) != plan.models.end();
  const auto curve = improvement_curve(
      results, has_mv ? std::string("mv") : std::string(to_string(plan.models.front())));

  const auto dir = prepare_out(a.out);
  write_file(dir, "results.csv", manifest, [&](std::ostream& o) {
    o << "method,sparsity,replicate,accuracy,mean_n_clusters\n";
    for (const auto& r : runs) {
      o << r.result.method << ',' << io::format_double(r.result.sparsity) << ','
        << r.result.replicate << ',' << io::format_double(r.result.accuracy) << ',';
      if (r.mean_n_clusters) o << io::format_double(*r.mean_n_clusters);
      o << '\n';
    }
  });
  write_file(dir, "improvement.csv", manifest, [&](std::ostream& o) {
    o << "method,sparsity,n,mean_accuracy,mean_improvement,sd_improvement,se_improvement\n";
    for (const auto& r : curve) {
      o << r.method << ',' << io::format_double(r.sparsity) << ',' << r.n << ','
        << io::format_double(r.mean_accuracy) << ',' << io::format_double(r.mean_improvement)
        << ',' << io::format_double(r.sd_improvement) << ','
        << io::format_double(r.se_improvement) << '\n';
    }
  });
  manifest.write(dir);
  log << "sweep: " << runs.size() << " runs -> " << a.out << '\n';
  return 0;
}

struct EvalArgs {
  std::string summary;
  std::string gold;
  std::string out;
};

inline int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& log) {
  Manifest manifest("eval", argv);
  const json s = io::read_json_file(a.summary);
  manifest.input("summary", a.summary);
  if (!s.contains("z_hat") || !s.at("z_hat").is_object()) {
    throw ValidationError(a.summary + ": missing 'z_hat' object");
  }
  const int C = s.value("n_categories", 0);
  io::IdMap instances;
  GroundTruth z_hat;
  for (const auto& [id, v] : s.at("z_hat").items()) {
    if (!v.is_number_integer() || v.get<int>() < 1 || (C > 0 && v.get<int>() > C)) {
      throw ValidationError(a.summary + ": z_hat['" + id + "'] is not a label in 1..C");
    }
    instances.intern(id);
    z_hat.push_back(v.get<int>() - 1);
  }
  auto in = io::detail::open_input(a.gold);
  std::optional<int> categories;
  if (C > 0) categories = C;
  const GroundTruth gold =
      io::join_labels(instances, io::read_id_labels(in, a.gold, categories), a.gold);
  manifest.input("gold", a.gold);
  manifest.set_config(json::object());
  const double acc = accuracy(z_hat, gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += z_hat[i] == gold[i];
  const json report = {{"accuracy", acc}, {"n_instances", gold.size()}, {"n_correct", hits}};
  if (!a.out.empty()) {
    const auto dir = prepare_out(a.out);
    write_file(dir, "report.json", manifest,
               [&](std::ostream& o) { o << report.dump(2) << '\n'; });
    manifest.write(dir);
  }
  log << "accuracy " << io::format_double(acc) << " (" << hits << "/" << gold.size() << ")\n";
  return 0;
}

}  // namespace detail

/// Runs the command line; returns the process exit code (0 success,
/// 1 invalid input, 2 failure while running).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian nonparametric label aggregation for crowdsourcing", "bncrowd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  detail::SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic crowd dataset");
  c_sim->add_option("--preset", sim.preset, "dataset1, dataset2 or dataset3");
  c_sim->add_option("--scale", sim.scale, "desk or paper")->capture_default_str();
  c_sim->add_option("--spec", sim.spec_path, "population spec JSON file");
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--out", sim.out, "output directory")->required();
  auto* sim_sparsity = c_sim->add_option("--sparsity", sim.sparsity_value,
                                         "also mask the matrix to this sparsity");

  detail::InferArgs inf;
  auto* c_inf = app.add_subcommand("infer", "estimate ground truth and annotator clusters");
  c_inf->add_option("--annotations", inf.annotations, "instance_id,user_id,label CSV")->required();
  c_inf->add_option("--model", inf.model, "mv, ibcc, cbcc or hcbcc")->capture_default_str();
  c_inf->add_option("--gold", inf.gold, "optional instance_id,label CSV for scoring");
  c_inf->add_option("--categories", inf.categories, "number of categories C");
  c_inf->add_option("--out", inf.out, "output directory")->required();
  inf.chain.add(c_inf);

  detail::SweepArgs swp;
  auto* c_swp = app.add_subcommand("sweep", "accuracy against sparsity over masked replicates");
  c_swp->add_option("--annotations", swp.annotations, "dense annotation CSV");
  c_swp->add_option("--gold", swp.gold, "instance_id,label CSV");
  c_swp->add_option("--preset", swp.preset, "simulate a preset instead of reading files");
  c_swp->add_option("--scale", swp.scale, "desk or paper")->capture_default_str();
  c_swp->add_option("--models", swp.models, "comma-separated model list")
      ->capture_default_str();
  c_swp->add_option("--sparsity", swp.sparsity, "comma-separated grid (default 0.825..0.975)");
  c_swp->add_option("--replicates", swp.replicates, "masks per sparsity level")
      ->capture_default_str();
  c_swp->add_option("--jobs", swp.jobs, "worker threads")->capture_default_str();
  c_swp->add_option("--categories", swp.categories, "number of categories C");
  c_swp->add_option("--out", swp.out, "output directory")->required();
  swp.chain.add(c_swp);

  detail::EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "score an inferred summary against gold labels");
  c_ev->add_option("--summary", ev.summary, "summary.json from infer")->required();
  c_ev->add_option("--gold", ev.gold, "instance_id,label CSV")->required();
  c_ev->add_option("--out", ev.out, "optional directory for report.json");

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  const std::vector<std::string> recorded(args.begin() + (args.empty() ? 0 : 1), args.end());
  try {
    if (c_sim->parsed()) {
      if (sim_sparsity->count()) sim.sparsity = sim.sparsity_value;
      return detail::cmd_simulate(sim, recorded, out);
    }
    if (c_inf->parsed()) return detail::cmd_infer(inf, recorded, out);
    if (c_swp->parsed()) return detail::cmd_sweep(swp, recorded, out);
    if (c_ev->parsed()) return detail::cmd_eval(ev, recorded, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace cli
}  // namespace bncrowd
