#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mapsep/common.hpp"
#include "mapsep/exp_family.hpp"
#include "mapsep/map_search.hpp"
#include "mapsep/models_normal.hpp"
#include "mapsep/partition.hpp"
#include "mapsep/partition_prior.hpp"
#include "mapsep/separability.hpp"

namespace mapsep {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV ingestion. One point per row, numeric columns, optional header row.
// ---------------------------------------------------------------------------

enum class CsvError { io, empty, ragged_row, non_numeric, duplicate_point };

class csv_error : public std::runtime_error {
 public:
  csv_error(CsvError code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CsvError code() const { return code_; }

 private:
  CsvError code_;
};

struct LoadOptions {
  // Deterministic uniform perturbation of every coordinate by up to +-jitter;
  // the documented way to feed data with duplicate rows.
  std::optional<double> jitter;
};

namespace detail {

inline bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end != '\0') {
    if (!std::isspace(static_cast<unsigned char>(*end))) return false;
    ++end;
  }
  return std::isfinite(out);
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const LoadOptions& opts = {}) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (trimmed.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_row(line);
    std::vector<double> row(cells.size());
    bool ok = true;
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (!detail::parse_double(cells[c], row[c])) {
        ok = false;
        break;
      }
    if (!ok) {
      if (header_allowed) {  // a single leading non-numeric row is a header
        header_allowed = false;
        continue;
      }
      throw csv_error(CsvError::non_numeric,
                      "line " + std::to_string(line_no) + ": non-numeric cell");
    }
    header_allowed = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw csv_error(CsvError::ragged_row, "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(rows.front().size()) + " columns");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw csv_error(CsvError::empty, "no data rows");

  Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

  if (opts.jitter) {
    const double eps = *opts.jitter;
    if (!(eps >= 0) || !std::isfinite(eps)) throw usage_error("jitter must be nonnegative");
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        std::uint64_t state = 0x6d617073u ^ (static_cast<std::uint64_t>(i) << 24) ^
                              (static_cast<std::uint64_t>(j) + 1);
        pts(i, j) += eps * (2.0 * uniform_from_bits(splitmix64(state)) - 1.0);
      }
  }

  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j)
      if ((pts.row(i).array() == pts.row(j).array()).all())
        throw csv_error(CsvError::duplicate_point,
                        "rows " + std::to_string(i) + " and " + std::to_string(j) +
                            " are identical" +
                            (opts.jitter ? " (even after jitter)" : "; use --jitter to perturb"));
  return Dataset(std::move(pts));
}

inline Dataset load_csv(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw csv_error(CsvError::io, "cannot open " + path);
  return parse_csv(in, opts);
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw csv_error(CsvError::io, "cannot open " + path + " for writing");
  out.precision(17);
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.dim(); ++j) {
      if (j) out << ',';
      out << data.points()(i, j);
    }
    out << '\n';
  }
}

// FNV-1a over the raw little-endian bytes of the point matrix plus its shape.
inline std::string dataset_digest(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mix_bytes = [&h](const void* p, std::size_t len) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  const std::int64_t shape[2] = {data.n(), data.dim()};
  mix_bytes(shape, sizeof shape);
  for (int i = 0; i < data.n(); ++i)
    for (int j = 0; j < data.dim(); ++j) {
      const double v = data.points()(i, j);
      mix_bytes(&v, sizeof v);
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Hyperparameter files and model construction.
// ---------------------------------------------------------------------------

using AnyModel = std::variant<NiwModel, FixedCovModel, NigModel>;

namespace detail {

inline Eigen::VectorXd vector_from_json(const json& j, int dim, const char* name) {
  Eigen::VectorXd v;
  if (j.is_number()) {
    if (dim <= 0) throw usage_error(std::string(name) + ": scalar given but dimension unknown");
    v = Eigen::VectorXd::Constant(dim, j.get<double>());
  } else if (j.is_array()) {
    v.resize(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  } else {
    throw usage_error(std::string(name) + ": expected a number or an array");
  }
  if (dim > 0 && v.size() != dim)
    throw usage_error(std::string(name) + ": length " + std::to_string(v.size()) +
                      " does not match dimension " + std::to_string(dim));
  return v;
}

// A scalar s denotes s * I; otherwise a full (symmetric) matrix.
inline Eigen::MatrixXd matrix_from_json(const json& j, int dim, const char* name) {
  if (j.is_number()) {
    if (dim <= 0) throw usage_error(std::string(name) + ": scalar given but dimension unknown");
    return j.get<double>() * Eigen::MatrixXd::Identity(dim, dim);
  }
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw usage_error(std::string(name) + ": expected a number or a matrix (array of arrays)");
  const int rows = static_cast<int>(j.size());
  Eigen::MatrixXd m(rows, rows);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[static_cast<std::size_t>(r)].size()) != rows)
      throw usage_error(std::string(name) + ": matrix must be square");
    for (int c = 0; c < rows; ++c)
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  if (dim > 0 && rows != dim)
    throw usage_error(std::string(name) + ": size does not match dimension " +
                      std::to_string(dim));
  return m;
}

inline int params_dim(const json& params, int data_dim) {
  if (data_dim > 0) return data_dim;
  if (params.contains("dim")) return params["dim"].get<int>();
  if (params.contains("mu0") && params["mu0"].is_array())
    return static_cast<int>(params["mu0"].size());
  throw usage_error("hyperparameters: dimension unknown; give mu0 as an array or set \"dim\"");
}

}  // namespace detail

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "niw") return ModelKind::niw;
  if (s == "fixed") return ModelKind::fixed_cov;
  if (s == "nig") return ModelKind::nig;
  throw usage_error("unknown model '" + s + "' (expected niw | fixed | nig)");
}

// Builds a model from a hyperparameter JSON object. `data_dim` pins the
// dimension when data is present (0 = infer from the file).
inline AnyModel make_model(ModelKind kind, const json& params, int data_dim) {
  const int d = detail::params_dim(params, data_dim);
  const auto need = [&](const char* key) -> const json& {
    if (!params.contains(key))
      throw usage_error(std::string("hyperparameters: missing \"") + key + "\"");
    return params.at(key);
  };
  switch (kind) {
    case ModelKind::niw: {
      NiwModel::Spec s;
      s.mu0 = detail::vector_from_json(need("mu0"), d, "mu0");
      s.sigma0 = detail::matrix_from_json(need("Sigma0"), d, "Sigma0");
      s.kappa0 = need("kappa0").get<double>();
      s.nu0 = need("nu0").get<double>();
      return NiwModel(std::move(s));
    }
    case ModelKind::fixed_cov: {
      FixedCovModel::Spec s;
      s.mu0 = detail::vector_from_json(need("mu0"), d, "mu0");
      s.psi0 = detail::matrix_from_json(need("Psi0"), d, "Psi0");
      s.sigma0 = detail::matrix_from_json(need("Sigma0"), d, "Sigma0");
      return FixedCovModel(std::move(s));
    }
    case ModelKind::nig: {
      NigModel::Spec s;
      s.mu0 = detail::vector_from_json(need("mu0"), d, "mu0");
      s.psi0 = detail::matrix_from_json(need("Psi0"), d, "Psi0");
      s.sigma0 = detail::matrix_from_json(need("Sigma0"), d, "Sigma0");
      s.beta0 = need("beta0").get<double>();
      return NigModel(std::move(s));
    }
  }
  throw usage_error("unreachable model kind");
}

// ---------------------------------------------------------------------------
// Synthetic data from the generative model: CRP seating, one component draw
// per block, one observation per point.
// ---------------------------------------------------------------------------

struct GeneratedData {
  Dataset data;
  Partition truth;
};

template <ExpFamilyModel M>
GeneratedData generate_dataset(const M& model, double alpha, int n, std::uint64_t seed) {
  if (n < 1) throw usage_error("generate_dataset: n must be >= 1");
  if (!(alpha > 0)) throw usage_error("generate_dataset: alpha must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif;

  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<int> counts;
  for (int i = 0; i < n; ++i) {
    const double u = unif(rng) * (alpha + i);
    double acc = 0.0;
    int chosen = static_cast<int>(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
      acc += counts[c];
      if (u < acc) {
        chosen = static_cast<int>(c);
        break;
      }
    }
    if (chosen == static_cast<int>(counts.size()))
      counts.push_back(1);
    else
      ++counts[static_cast<std::size_t>(chosen)];
    labels[static_cast<std::size_t>(i)] = chosen;
  }

  std::vector<GaussianComponent> comps;
  comps.reserve(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) comps.push_back(model.sample_component(rng));

  Eigen::MatrixXd pts(n, model.dim());
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      Eigen::VectorXd x = sample_gaussian(comps[static_cast<std::size_t>(labels[i])], rng);
      pts.row(i) = x.transpose();
      bool clash = false;
      for (int j = 0; j < i && !clash; ++j)
        clash = (pts.row(i).array() == pts.row(j).array()).all();
      if (!clash) break;
      if (attempt > 64) throw solver_error("generate_dataset: could not draw distinct points");
    }
  }
  return {Dataset(std::move(pts)), Partition(labels)};
}

// ---------------------------------------------------------------------------
// Run configuration and the persisted result record.
// ---------------------------------------------------------------------------

struct RunConfig {
  ModelKind model = ModelKind::fixed_cov;
  json params;  // hyperparameter object as loaded
  double alpha = 1.0;
  SearchMethod method = SearchMethod::exhaustive;
  std::uint64_t seed = 0;
  int budget = 1000;
  std::optional<double> jitter;
};

inline json to_json(const RunConfig& c) {
  json j;
  j["model"] = to_string(c.model);
  j["alpha"] = c.alpha;
  j["method"] = to_string(c.method);
  j["seed"] = c.seed;
  j["budget"] = c.budget;
  j["jitter"] = c.jitter ? json(*c.jitter) : json(nullptr);
  j["params"] = c.params;
  return j;
}

inline json surface_to_json(const SeparatingSurface& s) {
  json j;
  if (s.is_hyperplane()) {
    j["normal"] = std::vector<double>(s.linear.data(), s.linear.data() + s.linear.size());
    j["offset"] = s.offset;
  } else {
    std::vector<std::vector<double>> m(static_cast<std::size_t>(s.quad.rows()));
    for (Eigen::Index r = 0; r < s.quad.rows(); ++r)
      m[static_cast<std::size_t>(r)] =
          std::vector<double>(s.quad.row(r).begin(), s.quad.row(r).end());
    j["M"] = m;
    j["w"] = std::vector<double>(s.linear.data(), s.linear.data() + s.linear.size());
    j["c"] = s.offset;
  }
  return j;
}

struct ResultRecord {
  RunConfig config;
  std::string dataset_digest;
  int n = 0, dim = 0;
  ScoredPartition best;
  std::uint64_t visited = 0;
  PartitionCertification certification;
  std::vector<json> surfaces;  // one per certified pair, aligned with pairs
  double search_seconds = 0.0;
  double certify_seconds = 0.0;
};

inline Partition partition_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw usage_error("partition: expected a nonempty label array");
  std::vector<int> labels;
  labels.reserve(j.size());
  for (const auto& v : j) labels.push_back(v.get<int>());
  return Partition(std::move(labels));
}

// Search + certification + record assembly; the core of the `fit` command.
template <ExpFamilyModel M>
ResultRecord run_fit(const M& model, const RunConfig& config, const Dataset& data) {
  if (model.dim() != data.dim())
    throw usage_error("run_fit: model dimension " + std::to_string(model.dim()) +
                      " does not match data dimension " + std::to_string(data.dim()));
  CrpPrior prior(config.alpha);
  ResultRecord rec;
  rec.config = config;
  rec.dataset_digest = dataset_digest(data);
  rec.n = data.n();
  rec.dim = data.dim();

  SearchReport report;
  if (config.method == SearchMethod::exhaustive)
    report = exhaustive_map(model, prior, data);
  else
    report = local_search(model, prior, data, config.seed, config.budget);
  rec.best = report.best;
  rec.visited = report.visited;
  rec.search_seconds = report.wall_seconds;

  const auto t0 = std::chrono::steady_clock::now();
  rec.certification = certify_partition(model, data, rec.best.partition);
  for (const PairCertificate& pc : rec.certification.pairs) {
    if (pc.outcome.separable())
      rec.surfaces.push_back(surface_to_json(decode_surface(model, *pc.outcome.certificate)));
    else
      rec.surfaces.push_back(json(nullptr));
  }
  rec.certify_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline ResultRecord run_fit(const AnyModel& model, const RunConfig& config, const Dataset& data) {
  return std::visit([&](const auto& m) { return run_fit(m, config, data); }, model);
}

inline json to_json(const ResultRecord& r) {
  json j;
  j["version"] = version_string;
  j["config"] = to_json(r.config);
  j["dataset"] = json{{"digest", r.dataset_digest}, {"n", r.n}, {"d", r.dim}};
  json search;
  search["assignment"] = r.best.partition.labels();
  search["num_blocks"] = r.best.partition.num_blocks();
  search["log_prior"] = r.best.log_prior;
  search["log_lik"] = r.best.log_lik;
  search["log_post"] = r.best.log_post;
  search["visited"] = r.visited;
  search["tie_count"] = r.best.ties.size();
  j["search"] = search;

  json pairs = json::array();
  for (std::size_t i = 0; i < r.certification.pairs.size(); ++i) {
    const PairCertificate& pc = r.certification.pairs[i];
    json pj;
    pj["pair"] = {pc.block_i, pc.block_j};
    if (pc.outcome.separable()) {
      const Certificate& cert = *pc.outcome.certificate;
      pj["a"] = std::vector<double>(cert.a.data(), cert.a.data() + cert.a.size());
      pj["b"] = cert.b;
      pj["margin"] = cert.margin;
      pj["lp_margin"] = pc.outcome.lp_margin;
      if (i < r.surfaces.size()) pj["surface"] = r.surfaces[i];
    } else {
      pj["separable"] = false;
      pj["lp_margin"] = pc.outcome.lp_margin;
    }
    pairs.push_back(std::move(pj));
  }
  j["certification"] = json{{"all_separable", r.certification.all_separable},
                            {"pairs", std::move(pairs)}};
  j["timings"] =
      json{{"search_seconds", r.search_seconds}, {"certify_seconds", r.certify_seconds}};
  return j;
}

}  // namespace mapsep
