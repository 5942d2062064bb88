// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "bncrowd/core.hpp"
#include "bncrowd/sampler.hpp"
#include "bncrowd/synthgen.hpp"

namespace bncrowd::io {

using nlohmann::json;

/// String ids mapped to dense indices in order of first appearance.
class IdMap {
 public:
  std::size_t intern(const std::string& id) {
    auto [it, fresh] = index_.try_emplace(id, ids_.size());
    if (fresh) ids_.push_back(id);
    return it->second;
  }
  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& operator[](std::size_t k) const { return ids_[k]; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  static IdMap numbered(const std::string& prefix, std::size_t n) {
    IdMap m;
    for (std::size_t k = 0; k < n; ++k) m.intern(prefix + std::to_string(k + 1));
    return m;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AnnotationData {
  LabelMatrix labels;
  IdMap instances;
  IdMap users;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline long parse_label(std::string_view s, const std::string& source, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source, line, "label '" + std::string(s) + "' is not an integer");
  }
  return v;
}

// Reads a header-bearing CSV, checking the header and the column count of
// every row. Blank lines are skipped. Calls row(fields, line_number).
template <class RowFn>
void read_csv(std::istream& in, const std::string& source,
              const std::vector<std::string_view>& header, RowFn&& row) {
  std::string line;
  std::size_t n = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto fields = split_commas(line);
    if (!seen_header) {
      if (fields != header) {
        std::string want;
        for (auto h : header) want += (want.empty() ? "" : ",") + std::string(h);
        throw ParseError(source, n, "expected header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw ParseError(source, n, "expected " + std::to_string(header.size()) + " fields, got " +
                                      std::to_string(fields.size()));
    }
    for (auto f : fields) {
      if (f.empty()) throw ParseError(source, n, "empty field");
    }
    row(fields, n);
  }
  if (!seen_header) throw ParseError(source, n, "missing header");
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

/// Parses `instance_id,user_id,label` rows. Labels are 1..C in the file and
/// 0-based afterwards; C is the largest label seen unless `categories` fixes it.
inline AnnotationData read_annotations(std::istream& in, const std::string& source,
                                       std::optional<int> categories = std::nullopt) {
  struct Row {
    std::size_t i, l;
    long label;
    std::size_t line;
  };
  AnnotationData data;
  std::vector<Row> rows;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  long max_label = 0;
  detail::read_csv(in, source, {"instance_id", "user_id", "label"},
                   [&](const std::vector<std::string_view>& f, std::size_t line) {
                     const long label = detail::parse_label(f[2], source, line);
                     if (label < 1) {
                       throw ParseError(source, line,
                                        "label " + std::to_string(label) + " outside 1..C");
                     }
                     if (categories && label > *categories) {
                       throw ParseError(source, line,
                                        "label " + std::to_string(label) + " outside 1.." +
                                            std::to_string(*categories));
                     }
                     const std::size_t i = data.instances.intern(std::string(f[0]));
                     const std::size_t l = data.users.intern(std::string(f[1]));
                     const std::uint64_t key = (static_cast<std::uint64_t>(i) << 32) | l;
                     auto [it, fresh] = seen.try_emplace(key, line);
                     if (!fresh) {
                       throw ParseError(source, line,
                                        "duplicate annotation for (" + std::string(f[0]) + ", " +
                                            std::string(f[1]) + "), first seen on line " +
                                            std::to_string(it->second));
                     }
                     max_label = std::max(max_label, label);
                     rows.push_back({i, l, label, line});
                   });
  if (rows.empty()) throw ParseError(source, 1, "no annotations");
  const int C = categories.value_or(static_cast<int>(max_label));
  std::vector<Annotation> entries;
  entries.reserve(rows.size());
  for (const auto& r : rows) entries.push_back({r.i, r.l, static_cast<Category>(r.label - 1)});
  data.labels = LabelMatrix(data.instances.size(), data.users.size(), C, std::move(entries));
  return data;
}

inline AnnotationData read_annotations_file(const std::string& path,
                                            std::optional<int> categories = std::nullopt) {
  auto in = detail::open_input(path);
  return read_annotations(in, path, categories);
}

inline void write_annotations(std::ostream& out, const LabelMatrix& labels, const IdMap& instances,
                              const IdMap& users) {
  out << "instance_id,user_id,label\n";
  for (const auto& a : labels.entries()) {
    out << instances[a.instance] << ',' << users[a.user] << ',' << (a.label + 1) << '\n';
  }
}

/// Parses `instance_id,label` rows (labels 1..C) into 0-based pairs.
inline std::vector<std::pair<std::string, Category>> read_id_labels(std::istream& in,
                                                                    const std::string& source,
                                                                    std::optional<int> categories) {
  std::vector<std::pair<std::string, Category>> out;
  std::unordered_map<std::string, std::size_t> seen;
  detail::read_csv(in, source, {"instance_id", "label"},
                   [&](const std::vector<std::string_view>& f, std::size_t line) {
                     const long label = detail::parse_label(f[1], source, line);
                     if (label < 1 || (categories && label > *categories)) {
                       throw ParseError(source, line,
                                        "label " + std::to_string(label) + " outside 1..C");
                     }
                     auto [it, fresh] = seen.try_emplace(std::string(f[0]), line);
                     if (!fresh) {
                       throw ParseError(source, line,
                                        "duplicate instance '" + std::string(f[0]) + "'");
                     }
                     out.emplace_back(std::string(f[0]), static_cast<Category>(label - 1));
                   });
  return out;
}

inline void write_id_labels(std::ostream& out, const GroundTruth& z, const IdMap& instances) {
  out << "instance_id,label\n";
  for (std::size_t i = 0; i < z.size(); ++i) out << instances[i] << ',' << (z[i] + 1) << '\n';
}

/// Aligns (id, label) pairs with an instance id space; every id must match
/// and every instance must be covered.
inline GroundTruth join_labels(const IdMap& instances,
                               const std::vector<std::pair<std::string, Category>>& pairs,
                               const std::string& what) {
  GroundTruth z(instances.size(), -1);
  std::vector<std::string> unknown;
  for (const auto& [id, t] : pairs) {
    if (auto k = instances.find(id)) {
      z[*k] = t;
    } else {
      unknown.push_back(id);
    }
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0) missing.push_back(instances[i]);
  }
  auto list = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size() && k < 20; ++k) s += (k ? ", " : "") + v[k];
    if (v.size() > 20) s += ", ... (" + std::to_string(v.size()) + " total)";
    return s;
  };
  if (!unknown.empty()) {
    throw ValidationError(what + ": ids not present in the annotations: " + list(unknown));
  }
  if (!missing.empty()) throw ValidationError(what + ": no entry for instances: " + list(missing));
  return z;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON configuration

inline json read_json_file(const std::string& path) {
  auto in = detail::open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

namespace detail {

inline double number(const json& v, const std::string& key) {
  if (v.is_string() && (v == "inf" || v == "infinity")) {
    return std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) throw ValidationError("config: field '" + key + "' must be a number");
  return v.get<double>();
}

inline std::size_t count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ValidationError("config: field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

// A scalar broadcasts to every category.
inline Eigen::VectorXd vector(const json& v, const std::string& key, int n) {
  if (!v.is_array()) return Eigen::VectorXd::Constant(n, number(v, key));
  if (static_cast<int>(v.size()) != n) {
    throw ValidationError("config: field '" + key + "' must have " + std::to_string(n) +
                          " entries");
  }
  Eigen::VectorXd out(n);
  for (int k = 0; k < n; ++k) out[k] = number(v[k], key);
  return out;
}

// A scalar is the diagonal value with the remaining mass spread evenly.
inline Eigen::MatrixXd simplex_matrix(const json& v, const std::string& key, int n) {
  if (!v.is_array()) return Hyperparameters::diagonal_simplex(n, number(v, key));
  if (static_cast<int>(v.size()) != n) {
    throw ValidationError("config: field '" + key + "' must have " + std::to_string(n) + " rows");
  }
  Eigen::MatrixXd out(n, n);
  for (int t = 0; t < n; ++t) out.row(t) = vector(v[t], key, n).transpose();
  return out;
}

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::isinf(v[k])) {
      a.push_back("inf");
    } else {
      a.push_back(v[k]);
    }
  }
  return a;
}

inline json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index t = 0; t < m.rows(); ++t) a.push_back(to_json(Eigen::VectorXd(m.row(t).transpose())));
  return a;
}

}  // namespace detail

struct RunConfig {
  Hyperparameters hypers;
  ChainConfig chain;
};

/// Resolves a flat JSON object whose keys are the Hyperparameters and
/// ChainConfig field names; anything absent takes the default.
inline RunConfig resolve_config(const json& cfg, int n_categories) {
  if (!cfg.is_null() && !cfg.is_object()) throw ValidationError("config: expected a JSON object");
  RunConfig rc{Hyperparameters::defaults(n_categories), ChainConfig{}};
  auto& h = rc.hypers;
  auto& c = rc.chain;
  const int C = n_categories;
  bool gamma_set = false;
  bool phi_set = false;
  if (cfg.is_object()) {
    for (const auto& [key, v] : cfg.items()) {
      if (key == "eta") {
        h.eta = detail::simplex_matrix(v, key, C);
      } else if (key == "beta") {
        h.beta = detail::vector(v, key, C);
      } else if (key == "gamma") {
        h.gamma = detail::simplex_matrix(v, key, C);
        gamma_set = true;
      } else if (key == "phi") {
        h.phi = detail::vector(v, key, C);
        phi_set = true;
      } else if (key == "a_t") {
        h.a = detail::vector(v, key, C);
      } else if (key == "b_t") {
        h.b = detail::vector(v, key, C);
      } else if (key == "epsilon") {
        h.epsilon = detail::number(v, key);
      } else if (key == "mu") {
        h.mu = detail::vector(v, key, C);
      } else if (key == "a_alpha") {
        h.a_alpha = detail::number(v, key);
      } else if (key == "b_alpha") {
        h.b_alpha = detail::number(v, key);
      } else if (key == "n_iterations") {
        c.n_iterations = detail::count(v, key);
      } else if (key == "burn_in") {
        c.burn_in = detail::count(v, key);
      } else if (key == "seed") {
        c.seed = detail::count(v, key);
      } else if (key == "alpha_subiterations") {
        c.alpha_subiterations = detail::count(v, key);
      } else if (key == "h_aux_clusters") {
        c.h_aux_clusters = detail::count(v, key);
      } else if (key == "refresh_interval") {
        c.refresh_interval = detail::count(v, key);
      } else if (key == "initial_alpha") {
        c.initial_alpha = detail::number(v, key);
      } else {
        throw ValidationError("config: unknown field '" + key + "'");
      }
    }
  }
  // The top-level hierarchical prior follows eta/beta unless set explicitly.
  if (!gamma_set) h.gamma = h.eta;
  if (!phi_set) h.phi = h.beta;
  return rc;
}

inline json to_json(const RunConfig& rc) {
  const auto& h = rc.hypers;
  const auto& c = rc.chain;
  json j;
  j["eta"] = detail::to_json(h.eta);
  j["beta"] = detail::to_json(h.beta);
  j["gamma"] = detail::to_json(h.gamma);
  j["phi"] = detail::to_json(h.phi);
  j["a_t"] = detail::to_json(h.a);
  j["b_t"] = detail::to_json(h.b);
  j["epsilon"] = h.epsilon;
  j["mu"] = detail::to_json(h.mu);
  j["a_alpha"] = h.a_alpha;
  j["b_alpha"] = h.b_alpha;
  j["n_iterations"] = c.n_iterations;
  j["burn_in"] = c.burn_in;
  j["seed"] = c.seed;
  j["alpha_subiterations"] = c.alpha_subiterations;
  j["h_aux_clusters"] = c.h_aux_clusters;
  j["refresh_interval"] = c.refresh_interval;
  if (c.initial_alpha) j["initial_alpha"] = *c.initial_alpha;
  return j;
}

// ---------------------------------------------------------------------------
// Population specs

inline PopulationSpec population_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("population spec: expected a JSON object");
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) {
      throw ValidationError(std::string("population spec: missing field '") + key + "'");
    }
    return j.at(key);
  };
  PopulationSpec spec;
  spec.name = j.value("name", std::string("custom"));
  spec.n_instances = detail::count(need("n_instances"), "n_instances");
  spec.n_users = detail::count(need("n_users"), "n_users");
  spec.n_categories = static_cast<int>(detail::count(need("n_categories"), "n_categories"));
  if (spec.n_categories < 1) throw ValidationError("population spec: field 'n_categories' must be >= 1");
  const int C = spec.n_categories;
  spec.tau = j.contains("tau") ? detail::vector(j.at("tau"), "tau", C)
                               : Eigen::VectorXd::Constant(C, 1.0 / C);
  const json& clusters = need("clusters");
  if (!clusters.is_array()) throw ValidationError("population spec: field 'clusters' must be an array");
  for (std::size_t m = 0; m < clusters.size(); ++m) {
    const json& cj = clusters[m];
    const std::string at = "clusters[" + std::to_string(m) + "].";
    if (!cj.is_object() || !cj.contains("eta") || !cj.contains("beta") || !cj.contains("weight")) {
      throw ValidationError("population spec: field '" + at +
                            "{weight,eta,beta}' is required");
    }
    ClusterSpec cl;
    cl.name = cj.value("name", "M" + std::to_string(m + 1));
    cl.weight = detail::number(cj.at("weight"), at + "weight");
    cl.eta = detail::simplex_matrix(cj.at("eta"), at + "eta", C);
    cl.beta = detail::vector(cj.at("beta"), at + "beta", C);
    spec.clusters.push_back(std::move(cl));
  }
  spec.validate();
  return spec;
}

inline json to_json(const PopulationSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["n_instances"] = spec.n_instances;
  j["n_users"] = spec.n_users;
  j["n_categories"] = spec.n_categories;
  j["tau"] = detail::to_json(spec.tau);
  j["clusters"] = json::array();
  for (const auto& cl : spec.clusters) {
    j["clusters"].push_back({{"name", cl.name},
                             {"weight", cl.weight},
                             {"eta", detail::to_json(cl.eta)},
                             {"beta", detail::to_json(cl.beta)}});
  }
  return j;
}

}  // namespace bncrowd::io
