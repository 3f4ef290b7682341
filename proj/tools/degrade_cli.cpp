// Batch front end: descriptor, fpca, fit, predict, evaluate, compare, simulate.
#include "degrade/datamodel.hpp"
#include "degrade/descriptors.hpp"
#include "degrade/design.hpp"
#include "degrade/errors.hpp"
#include "degrade/evaluation.hpp"
#include "degrade/fpca.hpp"
#include "degrade/report.hpp"
#include "degrade/simulate.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace degrade;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct ModelFlags {
  std::string config_path;
  std::string variant;
  int k = -1;
  double fve = -1.0;
  double tol = -1.0;
  int max_iter = -1;
  long micro_column = -1;

  void add(CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON model configuration")->check(CLI::ExistingFile);
    sub->add_option("--variant", variant, "Model1..Model7");
    sub->add_option("--k", k, "FPCA components per functional covariate (0 = FVE rule)");
    sub->add_option("--fve", fve, "FVE threshold for selecting K");
    sub->add_option("--tol", tol, "relative log-likelihood tolerance");
    sub->add_option("--max-iter", max_iter, "EM iteration cap");
    sub->add_option("--micro-column", micro_column, "zero-based scalar column holding the microstructure summary");
  }

  VariantColumns columns() const {
    VariantColumns c;
    if (micro_column >= 0) c.micro_column = micro_column;
    return c;
  }

  ModelConfig base_config() const {
    ModelConfig c;
    if (!config_path.empty()) {
      Json j = read_json(config_path);
      j.erase("fit");  // fit options live in the same file
      c = config_from_json(j, c);
    }
    if (k >= 0) c.K = k;
    if (fve > 0.0) c.fve = fve;
    return c;
  }

  ModelConfig model_config(Index P) const {
    ModelConfig c = base_config();
    if (!variant.empty()) {
      const ModelVariant v = variant_by_name(variant);
      // The configuration file fixes the base; the variant sets the switches.
      c = variant_config(v, c, columns(), P);
    }
    return c;
  }

  FitOptions fit_options() const {
    FitOptions o;
    if (!config_path.empty()) {
      const Json j = read_json(config_path);
      if (j.contains("fit")) o = fit_options_from_json(j["fit"], o);
    }
    if (tol > 0.0) o.tol = tol;
    if (max_iter > 0) o.max_iter = max_iter;
    return o;
  }
};

void echo(const std::string& sub, const Json& j) {
  Json e;
  e["subcommand"] = sub;
  e["config"] = j;
  std::cerr << "run " << e.dump() << '\n';
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void write_fitted_rows(const FittedModel& model, std::ostream& out, bool flag_column) {
  for (const auto& u : model.data.units) {
    const VectorXd full = predict_unit(model, u, u.times, true);
    const VectorXd pop = predict_unit(model, u, u.times, false);
    for (Index j = 0; j < u.times.size(); ++j) {
      out << u.unit_id << ',' << format_double(u.times(j)) << ',' << format_double(u.responses(j)) << ','
          << format_double(full(j)) << ',' << format_double(pop(j));
      if (flag_column) out << (model.designs.latent_dim > 0 ? ",true" : ",false");
      out << '\n';
    }
  }
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Bi-level degradation modeling with scalar and functional covariates"};
  app.require_subcommand(1);

  // descriptor
  auto* desc = app.add_subcommand("descriptor", "microstructure descriptor curves (tpc | rdf)");
  std::string desc_kind;
  std::vector<std::string> images;
  std::vector<std::string> unit_ids;
  std::string particles, desc_out;
  double threshold = 0.5, dr = 0.0, rdf_r_max = 0.0;
  long tpc_r_max = 0;
  int desc_s = 1;
  bool periodic = false;
  desc->add_option("kind", desc_kind, "tpc or rdf")->required()->check(CLI::IsMember({"tpc", "rdf"}));
  desc->add_option("--image", images, "PGM micrograph (repeatable)")->check(CLI::ExistingFile);
  desc->add_option("--unit-id", unit_ids, "unit id per image (defaults to the file stem)");
  desc->add_option("--particles", particles, "particle CSV for rdf")->check(CLI::ExistingFile);
  desc->add_option("--threshold", threshold, "binarization threshold in (0, 1)");
  desc->add_option("--r-max", rdf_r_max, "largest distance")->required();
  desc->add_option("--dr", dr, "rdf bin width");
  desc->add_flag("--periodic", periodic, "periodic boundary for tpc");
  desc->add_option("--s", desc_s, "functional covariate index written to the s column");
  desc->add_option("--out", desc_out, "output CSV (stdout when omitted)");

  // fpca
  auto* fp = app.add_subcommand("fpca", "functional principal components of the dataset curves");
  std::string data_dir, out_dir;
  ModelFlags fp_flags;
  fp->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  fp->add_option("--out", out_dir, "output directory")->required();
  fp->add_option("--fve", fp_flags.fve, "FVE threshold");
  fp->add_option("--k", fp_flags.k, "override K");

  // fit
  auto* fit = app.add_subcommand("fit", "EM fit of one model");
  ModelFlags fit_flags;
  std::string dump_dir;
  fit->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_option("--dump-design", dump_dir, "write the design matrices to this directory");
  fit_flags.add(fit);

  // predict
  auto* pred = app.add_subcommand("predict", "fit, then predict training or new units");
  ModelFlags pred_flags;
  std::string test_dir;
  pred->add_option("--data", data_dir, "training dataset directory")->required()->check(CLI::ExistingDirectory);
  pred->add_option("--test", test_dir, "dataset directory with units to predict")->check(CLI::ExistingDirectory);
  pred->add_option("--out", out_dir, "output directory")->required();
  pred_flags.add(pred);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "goodness of fit, held-out error and cross-validation");
  ModelFlags eval_flags;
  double split = 0.8;
  int folds = 0;
  std::uint64_t seed = 1;
  eval->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out_dir, "output directory")->required();
  eval->add_option("--split", split, "training fraction of each unit's readings (1 disables)");
  eval->add_option("--folds", folds, "unit-level cross-validation folds (0 disables)");
  eval->add_option("--seed", seed, "fold shuffling seed");
  eval_flags.add(eval);

  // compare
  auto* cmp = app.add_subcommand("compare", "fit the Model1..Model7 family");
  ModelFlags cmp_flags;
  std::vector<std::string> variants;
  cmp->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--out", out_dir, "output directory")->required();
  cmp->add_option("--variants", variants, "subset of Model1..Model7")->delimiter(',');
  cmp->add_option("--split", split, "training fraction of each unit's readings (1 disables)");
  cmp->add_option("--folds", folds, "unit-level cross-validation folds (0 disables)");
  cmp->add_option("--seed", seed, "fold shuffling seed");
  cmp_flags.add(cmp);

  // simulate
  auto* sim = app.add_subcommand("simulate", "synthetic dataset with known parameters");
  std::string spec_path;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--spec", spec_path, "JSON synthetic spec")->check(CLI::ExistingFile);
  sim->add_option("--seed", sim_seed, "override the spec seed");
  sim->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    if (argc <= 1) std::cerr << app.help();
    return 1;
  }

  if (*desc) {
    Json cfg{{"kind", desc_kind}, {"images", images}, {"particles", particles}, {"threshold", threshold},
             {"r_max", rdf_r_max}, {"dr", dr}, {"periodic", periodic}, {"s", desc_s}};
    echo("descriptor", cfg);
    std::vector<std::pair<std::string, DescriptorCurve>> curves;
    auto id_for = [&](std::size_t i, const std::string& path) {
      return i < unit_ids.size() ? unit_ids[i] : fs::path(path).stem().string();
    };
    if (desc_kind == "tpc") {
      if (images.empty()) throw ValidationError("tpc needs at least one --image");
      tpc_r_max = static_cast<long>(rdf_r_max);
      if (static_cast<double>(tpc_r_max) != rdf_r_max) throw ValidationError("tpc --r-max must be an integer");
      for (std::size_t i = 0; i < images.size(); ++i) {
        const auto img = binarize_image(read_pgm(images[i]), threshold);
        curves.emplace_back(id_for(i, images[i]), compute_tpc(img, tpc_r_max, periodic));
      }
    } else {
      if (!(dr > 0.0)) throw ValidationError("rdf needs --dr > 0");
      if (!particles.empty()) {
        curves.emplace_back(unit_ids.empty() ? fs::path(particles).stem().string() : unit_ids[0],
                            compute_rdf(read_particles_csv(particles), rdf_r_max, dr));
      }
      for (std::size_t i = 0; i < images.size(); ++i) {
        const auto img = binarize_image(read_pgm(images[i]), threshold);
        curves.emplace_back(id_for(i + (particles.empty() ? 0 : 1), images[i]),
                            compute_rdf(extract_particles(img), rdf_r_max, dr));
      }
      if (curves.empty()) throw ValidationError("rdf needs --particles or --image");
      for (const auto& [id, c] : curves)
        if (c.degenerate) std::cerr << "warning: no reference particle inside the guard region for " << id << '\n';
    }
    auto emit = [&](std::ostream& out) {
      for (std::size_t i = 0; i < curves.size(); ++i)
        write_descriptor_csv(curves[i].second, curves[i].first, desc_s, out, i == 0);
    };
    if (desc_out.empty()) {
      emit(std::cout);
    } else {
      auto out = open_out(desc_out);
      emit(out);
    }
    return 0;
  }

  if (*sim) {
    SyntheticSpec spec = spec_path.empty() ? default_spec(1) : spec_from_json(read_json(spec_path));
    if (sim_seed) spec.seed = *sim_seed;
    echo("simulate", spec_to_json(spec));
    const SyntheticData data = generate_dataset(spec);
    fs::create_directories(out_dir);
    save_dataset_dir(data.dataset, out_dir);
    write_json(truth_to_json(data), fs::path(out_dir) / "truth.json");
    write_json(spec_to_json(spec), fs::path(out_dir) / "spec.json");
    return 0;
  }

  const DegradationDataset ds = load_dataset_dir(data_dir);
  fs::create_directories(out_dir);
  const fs::path out = out_dir;

  if (*fp) {
    if (ds.S == 0) throw ValidationError("dataset has no functional covariates");
    echo("fpca", Json{{"data", data_dir}, {"fve", fp_flags.fve > 0 ? fp_flags.fve : 0.95}, {"k", fp_flags.k}});
    Json report = Json::array();
    auto scores_out = open_out(out / "scores.csv");
    auto eig_out = open_out(out / "eigenfunctions.csv");
    scores_out << "unit_id,s,k,score\n";
    eig_out << "s,k,r,psi\n";
    const auto N = static_cast<Index>(ds.size());
    for (Index s = 0; s < ds.S; ++s) {
      MatrixXd curves(N, ds.r_grid.size());
      for (Index i = 0; i < N; ++i) curves.row(i) = ds.units[static_cast<std::size_t>(i)].curves[s].transpose();
      FpcaModel f = fit_fpca(curves, ds.r_grid, fp_flags.fve > 0 ? fp_flags.fve : 0.95);
      if (fp_flags.k > 0) {
        if (fp_flags.k > f.full_rank()) throw ValidationError("--k exceeds the nonzero FPCA components");
        f.K = fp_flags.k;
      }
      const MatrixXd sc = project_scores(f, curves);
      for (Index i = 0; i < N; ++i)
        for (Index k = 0; k < f.K; ++k)
          scores_out << ds.units[static_cast<std::size_t>(i)].unit_id << ',' << s + 1 << ',' << k + 1 << ','
                     << format_double(sc(i, k)) << '\n';
      for (Index k = 0; k < f.K; ++k)
        for (Index g = 0; g < f.r_grid.size(); ++g)
          eig_out << s + 1 << ',' << k + 1 << ',' << format_double(f.r_grid(g)) << ','
                  << format_double(f.eigenfunctions(g, k)) << '\n';
      report.push_back(fpca_to_json(f));
    }
    write_json(Json{{"covariates", report}}, out / "fpca_report.json");
    return 0;
  }

  if (*fit) {
    const ModelConfig config = fit_flags.model_config(ds.P);
    const FitOptions options = fit_flags.fit_options();
    echo("fit", Json{{"data", data_dir}, {"model", config_to_json(config)}, {"fit", fit_options_to_json(options)}});
    const FittedModel model = fit_model(ds, config, options);
    if (!dump_dir.empty()) dump_design(model.designs, dump_dir);
    write_json(fit_report(model), out / "fit_report.json");
    auto eff = open_out(out / "effects.csv");
    write_effects_csv(effect_decomposition(model), eff);
    auto fitted = open_out(out / "fitted.csv");
    fitted << "unit_id,time,observed,fitted,population\n";
    write_fitted_rows(model, fitted, false);
    if (!model.fit.converged) std::cerr << "warning: EM stopped at the iteration cap before converging\n";
    return 0;
  }

  if (*pred) {
    const ModelConfig config = pred_flags.model_config(ds.P);
    const FitOptions options = pred_flags.fit_options();
    echo("predict", Json{{"data", data_dir}, {"test", test_dir}, {"model", config_to_json(config)},
                         {"fit", fit_options_to_json(options)}});
    const FittedModel model = fit_model(ds, config, options);
    auto pout = open_out(out / "predictions.csv");
    pout << "unit_id,time,observed,predicted,population,uses_latent\n";
    if (test_dir.empty()) {
      write_fitted_rows(model, pout, true);
    } else {
      const DegradationDataset test = load_dataset_dir(test_dir);
      for (const auto& raw : test.units) {
        const auto idx = model.unit_index(raw.unit_id);
        UnitRecord u = raw;
        if (idx) {
          u.responses.array() -= model.baselines(static_cast<Index>(*idx));
        } else {
          DegradationDataset one;
          one.P = test.P;
          one.S = test.S;
          one.r_grid = test.r_grid;
          one.units.push_back(raw);
          u = prepare_responses(one, config).units[0];
        }
        const VectorXd pop = predict_unit(model, u, u.times, false);
        const bool latent = idx && model.designs.latent_dim > 0;
        const VectorXd full = latent ? predict_unit(model, u, u.times, true) : pop;
        for (Index j = 0; j < u.times.size(); ++j)
          pout << u.unit_id << ',' << format_double(u.times(j)) << ',' << format_double(u.responses(j)) << ','
               << format_double(full(j)) << ',' << format_double(pop(j)) << ',' << (latent ? "true" : "false") << '\n';
      }
    }
    return 0;
  }

  if (*eval) {
    const ModelConfig config = eval_flags.model_config(ds.P);
    const FitOptions options = eval_flags.fit_options();
    echo("evaluate", Json{{"data", data_dir}, {"split", split}, {"folds", folds}, {"seed", seed},
                          {"model", config_to_json(config)}, {"fit", fit_options_to_json(options)}});
    std::optional<TemporalSplit> parts;
    if (split < 1.0) parts = temporal_split(ds, split);
    const FittedModel model = fit_model(parts ? parts->train : ds, config, options);
    Metrics m = evaluate_fit(model, parts ? parts->test : DegradationDataset{});
    Json report;
    if (folds > 0) {
      const CvResult cv = kfold_cv(ds, config, folds, seed, options);
      m.cv_error = cv.cv_error;
      report["fold_errors"] = cv.fold_errors;
    }
    report["metrics"] = metrics_to_json(m);
    report["parameter_count_convention"] =
        "p = U + 1 + free entries of Sigma_gamma; BIC uses the number of fitted observations";
    write_json(report, out / "metrics.json");
    return 0;
  }

  if (*cmp) {
    const ModelConfig base = cmp_flags.base_config();
    const FitOptions options = cmp_flags.fit_options();
    std::vector<ModelVariant> family;
    if (variants.empty()) family = model_family();
    for (const auto& name : variants) family.push_back(variant_by_name(name));
    CompareOptions co;
    co.train_fraction = split;
    co.folds = folds;
    co.seed = seed;
    co.columns = cmp_flags.columns();
    Json names = Json::array();
    for (const auto& v : family) names.push_back(v.name);
    echo("compare", Json{{"data", data_dir}, {"variants", names}, {"split", split}, {"folds", folds}, {"seed", seed},
                         {"micro_column", cmp_flags.micro_column}, {"base", config_to_json(base)},
                         {"fit", fit_options_to_json(options)}});
    const auto rows = compare_models(ds, family, base, options, co);
    auto csv = open_out(out / "comparison.csv");
    write_comparison_csv(rows, csv);
    for (const auto& r : rows)
      if (!r.metrics) std::cerr << "warning: " << r.model << " failed: " << r.error << '\n';
    return 0;
  }
  return 1;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
