// Command-line front end: MAP partition search with separability
// certification for conjugate Normal mixture models.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mapsep/fixtures.hpp"
#include "mapsep/mapsep.hpp"

namespace {

using mapsep::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mapsep::usage_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-" || path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw mapsep::usage_error("cannot open " + path + " for writing");
  out << text << "\n";
}

struct CommonArgs {
  std::string model = "fixed";
  std::string params_path;
  double alpha = 1.0;
  std::string data_path;
  std::optional<double> jitter;
};

mapsep::AnyModel build_model(const CommonArgs& args, int data_dim) {
  return mapsep::make_model(mapsep::model_kind_from_string(args.model),
                            read_json_file(args.params_path), data_dim);
}

mapsep::Dataset load_data(const CommonArgs& args) {
  mapsep::LoadOptions opts;
  opts.jitter = args.jitter;
  return mapsep::load_csv(args.data_path, opts);
}

void add_model_options(CLI::App* cmd, CommonArgs& args, bool with_data) {
  cmd->add_option("--model", args.model, "Model: niw | fixed | nig")->required();
  cmd->add_option("--params", args.params_path, "Hyperparameter JSON file")->required();
  cmd->add_option("--alpha", args.alpha, "CRP concentration");
  if (with_data) {
    cmd->add_option("--data", args.data_path, "CSV data file, one point per row")->required();
    cmd->add_option("--jitter", args.jitter,
                    "Deterministically perturb coordinates by up to this amount");
  }
}

mapsep::Partition read_labels(const std::string& labels_arg) {
  json j;
  if (!labels_arg.empty() && (labels_arg.front() == '[')) {
    j = json::parse(labels_arg);
  } else {
    j = read_json_file(labels_arg);
  }
  return mapsep::partition_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAP partitions of Bayesian mixture models with separability certificates"};
  app.require_subcommand(1);

  // ---- fit ----
  CommonArgs fit_args;
  std::string fit_method = "exhaustive";
  std::uint64_t fit_seed = 0;
  int fit_budget = 1000;
  std::string fit_out = "-";
  CLI::App* fit = app.add_subcommand("fit", "Search for the MAP partition and certify it");
  add_model_options(fit, fit_args, true);
  fit->add_option("--method", fit_method, "exhaustive | local");
  fit->add_option("--seed", fit_seed, "Seed for the local search");
  fit->add_option("--budget", fit_budget, "Accepted-move budget for the local search");
  fit->add_option("--out", fit_out, "Result JSON path ('-' for stdout)");

  // ---- score ----
  CommonArgs score_args;
  std::string score_labels;
  CLI::App* score = app.add_subcommand("score", "Score a user-supplied partition");
  add_model_options(score, score_args, true);
  score->add_option("--labels", score_labels, "JSON label array (inline or a file path)")
      ->required();

  // ---- certify ----
  CommonArgs certify_args;
  std::string certify_labels;
  std::string certify_out = "-";
  CLI::App* certify = app.add_subcommand("certify", "Certify separability of a labeled partition");
  add_model_options(certify, certify_args, true);
  certify->add_option("--labels", certify_labels, "JSON label array (inline or a file path)")
      ->required();
  certify->add_option("--out", certify_out, "Certificate JSON path ('-' for stdout)");

  // ---- generate ----
  CommonArgs gen_args;
  int gen_n = 10;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "data.csv";
  std::string gen_truth;
  CLI::App* generate = app.add_subcommand("generate", "Sample a synthetic dataset from the model");
  add_model_options(generate, gen_args, false);
  generate->add_option("--n", gen_n, "Number of points")->required();
  generate->add_option("--seed", gen_seed, "RNG seed");
  generate->add_option("--out", gen_out, "Output CSV path");
  generate->add_option("--truth-out", gen_truth, "Ground-truth partition JSON path");

  // ---- enumerate ----
  int enum_n = 0;
  bool enum_list = false;
  CLI::App* enumerate = app.add_subcommand("enumerate", "Count (or list) set partitions of [n]");
  enumerate->add_option("--n", enum_n, "Number of elements")->required();
  enumerate->add_flag("--list", enum_list, "Print every partition as a label string");

  // ---- oracle-check ----
  CLI::App* oracle_check =
      app.add_subcommand("oracle-check", "Recompute the quadrature fixtures and diff");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      mapsep::Dataset data = load_data(fit_args);
      mapsep::RunConfig config;
      config.model = mapsep::model_kind_from_string(fit_args.model);
      config.params = read_json_file(fit_args.params_path);
      config.alpha = fit_args.alpha;
      config.method = fit_method == "local" ? mapsep::SearchMethod::local
                                            : mapsep::SearchMethod::exhaustive;
      if (fit_method != "local" && fit_method != "exhaustive")
        throw mapsep::usage_error("unknown method '" + fit_method + "'");
      config.seed = fit_seed;
      config.budget = fit_budget;
      config.jitter = fit_args.jitter;
      mapsep::AnyModel model = build_model(fit_args, data.dim());

      mapsep::ResultRecord rec = mapsep::run_fit(model, config, data);
      write_text(fit_out, mapsep::to_json(rec).dump(2));

      if (!rec.certification.all_separable) {
        if (config.method == mapsep::SearchMethod::exhaustive) {
          // Falsification event: an exhaustive MAP pair without a certificate.
          std::cerr << "FALSIFICATION: exhaustive MAP has a non-separable pair\n";
          std::cerr << "dataset digest " << rec.dataset_digest << ", assignment ";
          for (int l : rec.best.partition.labels()) std::cerr << l << ' ';
          std::cerr << "\nfull record follows:\n" << mapsep::to_json(rec).dump(2) << "\n";
          return 2;
        }
        std::cerr << "note: local-search result has non-separable pairs "
                     "(no MAP guarantee for heuristic results)\n";
      }
      return 0;
    }

    if (*score) {
      mapsep::Dataset data = load_data(score_args);
      mapsep::AnyModel model = build_model(score_args, data.dim());
      mapsep::Partition part = read_labels(score_labels);
      mapsep::CrpPrior prior(score_args.alpha);
      const mapsep::ScoredPartition s = std::visit(
          [&](const auto& m) { return mapsep::score_partition(m, prior, data, part); }, model);
      json out;
      out["assignment"] = s.partition.labels();
      out["log_prior"] = s.log_prior;
      out["log_lik"] = s.log_lik;
      out["log_post"] = s.log_post;
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*certify) {
      mapsep::Dataset data = load_data(certify_args);
      mapsep::AnyModel model = build_model(certify_args, data.dim());
      mapsep::Partition part = read_labels(certify_labels);
      json out = std::visit(
          [&](const auto& m) {
            mapsep::PartitionCertification table = mapsep::certify_partition(m, data, part);
            json pairs = json::array();
            for (const mapsep::PairCertificate& pc : table.pairs) {
              json pj;
              pj["pair"] = {pc.block_i, pc.block_j};
              pj["lp_margin"] = pc.outcome.lp_margin;
              if (pc.outcome.separable()) {
                const mapsep::Certificate& cert = *pc.outcome.certificate;
                pj["a"] = std::vector<double>(cert.a.data(), cert.a.data() + cert.a.size());
                pj["b"] = cert.b;
                pj["margin"] = cert.margin;
                pj["surface"] = mapsep::surface_to_json(mapsep::decode_surface(m, cert));
              } else {
                pj["separable"] = false;
              }
              pairs.push_back(pj);
            }
            return json{{"all_separable", table.all_separable}, {"pairs", pairs}};
          },
          model);
      write_text(certify_out, out.dump(2));
      return 0;
    }

    if (*generate) {
      json params = read_json_file(gen_args.params_path);
      mapsep::AnyModel model =
          mapsep::make_model(mapsep::model_kind_from_string(gen_args.model), params, 0);
      mapsep::GeneratedData gen = std::visit(
          [&](const auto& m) { return mapsep::generate_dataset(m, gen_args.alpha, gen_n, gen_seed); },
          model);
      mapsep::save_csv(gen.data, gen_out);
      if (!gen_truth.empty()) {
        json t;
        t["assignment"] = gen.truth.labels();
        t["num_blocks"] = gen.truth.num_blocks();
        t["seed"] = gen_seed;
        write_text(gen_truth, t.dump(2));
      }
      std::cerr << "wrote " << gen.data.n() << " points (" << gen.truth.num_blocks()
                << " true blocks) to " << gen_out << "\n";
      return 0;
    }

    if (*enumerate) {
      if (enum_list && enum_n > 12)
        throw mapsep::usage_error("enumerate --list: n capped at 12 (about " +
                                  std::to_string(mapsep::bell_number(std::min(enum_n, 25))) +
                                  " partitions)");
      if (enum_list) {
        mapsep::for_each_partition(enum_n, [](const std::vector<int>& rgs) {
          std::string s;
          for (int l : rgs) s += std::to_string(l) + " ";
          std::cout << s << "\n";
        });
      }
      std::cout << mapsep::bell_number(enum_n) << "\n";
      return 0;
    }

    if (*oracle_check) {
      int failures = 0;
      std::printf("%-18s %24s %24s %12s\n", "fixture", "frozen", "recomputed", "rel.diff");
      for (const auto& f : mapsep::fixtures::marginal_fixtures()) {
        const auto r = mapsep::fixtures::rerun_oracle(f);
        const double rel = std::abs(r.log_value - f.log_marginal) / std::abs(f.log_marginal);
        const bool ok = rel < 1e-7;
        std::printf("%-18s %24.16g %24.16g %12.3e %s\n", f.name, f.log_marginal, r.log_value, rel,
                    ok ? "" : "MISMATCH");
        failures += !ok;
        const double closed = mapsep::fixtures::closed_form(f);
        const double rel_closed = std::abs(closed - f.log_marginal) / std::abs(f.log_marginal);
        if (rel_closed > 1e-6) {
          std::printf("%-18s closed form off by %.3e\n", f.name, rel_closed);
          ++failures;
        }
      }
      return failures == 0 ? 0 : 1;
    }
  } catch (const mapsep::csv_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
