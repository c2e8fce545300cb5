// Apache License, Version 2.0, refer to LICENSE.txt
//
// sdpm: streaming supermodel over experiment posteriors.
//   simulate  synthetic experiment batches (toy / case1 / case2)
//   ingest    absorb batches into a model file
//   query     rank stored experiments by relevance to a query batch
//   density   evaluate the ensemble density
//   eval      leave-one-out retrieval evaluation and reports
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

#include "sdpm/batch_io.hpp"
#include "sdpm/errors.hpp"
#include "sdpm/eval.hpp"
#include "sdpm/samplers.hpp"
#include "sdpm/supermodel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct EngineFlags {
  int particles = 100;
  double alpha = 2.0;
  std::string mode = "map";
  std::string resampler = "multinomial";
  std::uint64_t seed = 20140306;
  int recompute_period = 32;
  std::string xi = "normalized";
  std::string component_density = "plugin";
  double kappa = 0.25;
  std::optional<double> nu;
  std::optional<double> omega_scale;

  void attach(CLI::App* cmd) {
    cmd->add_option("--particles", particles, "Ensemble size N");
    cmd->add_option("--alpha", alpha, "Concentration parameter");
    cmd->add_option("--mode", mode, "Allocation mode: map|sample")
        ->check(CLI::IsMember({"map", "sample"}));
    cmd->add_option("--resampler", resampler, "Resampler: multinomial|systematic")
        ->check(CLI::IsMember({"multinomial", "systematic"}));
    cmd->add_option("--seed", seed, "Base seed for all random sub-streams");
    cmd->add_option("--recompute-period", recompute_period,
                    "Forced Cholesky refactorization period");
    cmd->add_option("--xi", xi, "Assignment-count weighting: normalized|raw")
        ->check(CLI::IsMember({"normalized", "raw"}));
    cmd->add_option("--component-density", component_density,
                    "Scoring density: plugin|predictive")
        ->check(CLI::IsMember({"plugin", "predictive"}));
    cmd->add_option("--kappa", kappa, "Prior precision scale");
    cmd->add_option("--nu", nu, "Prior shape (default: dim + 2)");
    cmd->add_option("--omega-scale", omega_scale,
                    "Prior scale matrix diagonal (default: nu - (dim+1)/2)");
  }

  sdpm::DpmConfig to_config(int dim) const {
    sdpm::DpmConfig cfg;
    cfg.n_particles = particles;
    cfg.alpha = alpha;
    cfg.mode = mode == "map" ? sdpm::AllocationMode::Map : sdpm::AllocationMode::Sample;
    cfg.resampler = resampler == "multinomial" ? sdpm::ResampleScheme::Multinomial
                                               : sdpm::ResampleScheme::Systematic;
    cfg.seed = seed;
    cfg.recompute_period = recompute_period;
    cfg.normalize_xi = xi == "normalized";
    cfg.component_density = component_density == "plugin"
                                ? sdpm::ComponentDensity::PluginGaussian
                                : sdpm::ComponentDensity::PredictiveT;
    const double resolved_nu = nu.value_or(dim + 2.0);
    const double resolved_omega = omega_scale.value_or(resolved_nu - 0.5 * (dim + 1));
    cfg.prior = sdpm::NiwPrior(sdpm::Vector::Zero(dim), kappa,
                               resolved_omega * sdpm::Matrix::Identity(dim, dim),
                               resolved_nu);
    return cfg;
  }

  json to_json() const {
    json j;
    j["particles"] = particles;
    j["alpha"] = alpha;
    j["mode"] = mode;
    j["resampler"] = resampler;
    j["seed"] = seed;
    j["recompute_period"] = recompute_period;
    j["xi"] = xi;
    j["component_density"] = component_density;
    j["kappa"] = kappa;
    j["nu"] = nu ? json(*nu) : json("auto");
    j["omega_scale"] = omega_scale ? json(*omega_scale) : json("auto");
    return j;
  }
};

fs::path default_out_dir() {
  if (const char* env = std::getenv("SDPM_OUT_DIR")) return fs::path(env);
  return fs::path(".");
}

/// Resolved-configuration echo, written before any work happens.
void echo_config(const fs::path& out_dir, const std::string& command, const json& resolved) {
  fs::create_directories(out_dir);
  json j;
  j["command"] = command;
  j["config"] = resolved;
  std::ofstream out(out_dir / "run_config.json", std::ios::trunc);
  if (!out) throw sdpm::IoError("cannot write config echo in '" + out_dir.string() + "'");
  out << j.dump(2) << '\n';
}

/// Advisory lock so two invocations do not mutate one model file at once.
class ModelLock {
 public:
  explicit ModelLock(const fs::path& model_path) : path_(model_path.string() + ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST)
        throw std::invalid_argument("model file is locked by another invocation ('" +
                                    path_ + "' exists)");
      throw sdpm::IoError("cannot create lock file '" + path_ + "'");
    }
  }
  ~ModelLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  ModelLock(const ModelLock&) = delete;
  ModelLock& operator=(const ModelLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

std::vector<sdpm::SampleBatch> load_batches(const std::vector<std::string>& files,
                                            const std::string& batch_dir) {
  std::vector<fs::path> paths;
  for (const auto& f : files) paths.emplace_back(f);
  if (!batch_dir.empty())
    for (auto& p : sdpm::io::list_batch_files(batch_dir)) paths.push_back(p);
  std::vector<sdpm::SampleBatch> batches;
  batches.reserve(paths.size());
  for (const auto& p : paths) batches.push_back(sdpm::io::read_batch(p));
  return batches;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string sim_case;
  std::string out;
  std::uint64_t seed = 20140306;
  int toy_n = 300;
  bool proportional = false;
  bool scale_as_sd = false;
  std::optional<int> dim, experiments, classes, draws, obs_min, obs_max, burn_in;
  std::optional<double> coeff_range, noise_sd;
  double eta = 0.0;
};

int run_simulate(const SimulateArgs& args) {
  fs::path out_dir(args.out);

  json echo;
  echo["case"] = args.sim_case;
  echo["out"] = args.out;
  echo["seed"] = args.seed;
  echo["eta"] = args.eta;

  std::vector<sdpm::SampleBatch> batches;
  if (args.sim_case == "toy") {
    echo["n_per_mode"] = args.toy_n;
    echo["proportional"] = args.proportional;
    echo["scale_as_sd"] = args.scale_as_sd;
    echo_config(out_dir, "simulate", echo);
    batches = sdpm::toy_batches(args.toy_n, args.seed,
                                {.proportional = args.proportional,
                                 .scale_is_sd = args.scale_as_sd});
  } else {
    sdpm::SimScenario s = args.sim_case == "case1" ? sdpm::SimScenario::case1_defaults()
                                                   : sdpm::SimScenario::case2_defaults();
    s.eta = args.eta;
    s.seed = args.seed;
    if (args.dim) s.p = *args.dim;
    if (args.experiments) s.n_experiments = *args.experiments;
    if (args.classes) s.n_classes = *args.classes;
    if (args.draws) s.mcmc_draws = *args.draws;
    if (args.obs_min) s.obs_range.first = *args.obs_min;
    if (args.obs_max) s.obs_range.second = *args.obs_max;
    if (args.coeff_range) s.coeff_range = *args.coeff_range;
    if (args.noise_sd) s.noise_sd = *args.noise_sd;
    if (args.burn_in) s.burn_in = *args.burn_in;
    echo["p"] = s.p;
    echo["experiments"] = s.n_experiments;
    echo["classes"] = s.n_classes;
    echo["draws"] = s.mcmc_draws;
    echo["obs_range"] = {s.obs_range.first, s.obs_range.second};
    echo["coeff_range"] = s.coeff_range;
    echo["noise_sd"] = s.noise_sd;
    echo["burn_in"] = s.burn_in;
    echo_config(out_dir, "simulate", echo);
    batches = args.sim_case == "case1" ? sdpm::gen_case1(s) : sdpm::gen_case2(s);
  }

  std::vector<fs::path> files;
  for (const auto& b : batches) files.push_back(sdpm::io::write_batch(out_dir, b));
  sdpm::io::write_manifest(out_dir, files, batches);
  std::printf("wrote %zu batches to %s\n", batches.size(), out_dir.string().c_str());
  return 0;
}

// --- ingest ------------------------------------------------------------------

struct IngestArgs {
  std::string model;
  std::vector<std::string> batches;
  std::string batch_dir;
  bool create = false;
  std::string out_dir = default_out_dir().string();
  EngineFlags engine;
};

int run_ingest(const IngestArgs& args) {
  json echo = args.engine.to_json();
  echo["model"] = args.model;
  echo["create"] = args.create;
  echo["batch_dir"] = args.batch_dir;
  echo["batches"] = args.batches;
  echo_config(args.out_dir, "ingest", echo);

  std::vector<sdpm::SampleBatch> batches = load_batches(args.batches, args.batch_dir);
  if (batches.empty()) throw std::invalid_argument("ingest: no batches given");

  ModelLock lock(args.model);
  std::optional<sdpm::Supermodel> model;
  if (fs::exists(args.model)) {
    model = sdpm::Supermodel::load_file(args.model);
  } else if (args.create) {
    const int dim = batches.front().dim();
    model.emplace(dim, args.engine.to_config(dim));
  } else {
    throw sdpm::IoError("model file '" + args.model + "' does not exist (use --create)");
  }

  for (const auto& batch : batches) {
    model->ingest(batch);
    double mean_k = 0.0;
    for (const auto& particle : model->particles()) mean_k += particle.k();
    mean_k /= static_cast<double>(model->particles().size());
    std::printf("ingested %-16s n=%-6lld mean components %.1f\n", batch.id.c_str(),
                static_cast<long long>(batch.n()), mean_k);
  }
  model->save_file(args.model);
  std::printf("saved %s (%zu experiments, %llu samples)\n", args.model.c_str(),
              model->registry().size(),
              static_cast<unsigned long long>(model->total_ingested()));
  return 0;
}

// --- query -------------------------------------------------------------------

struct QueryArgs {
  std::string model;
  std::string batch;
  std::size_t top_k = 0;
  std::string out;
  std::string out_dir = default_out_dir().string();
};

int run_query(const QueryArgs& args) {
  json echo;
  echo["model"] = args.model;
  echo["batch"] = args.batch;
  echo["top_k"] = args.top_k;
  echo["out"] = args.out;
  echo_config(args.out_dir, "query", echo);

  sdpm::Supermodel model = sdpm::Supermodel::load_file(args.model);
  sdpm::SampleBatch query = sdpm::io::read_batch(args.batch);
  sdpm::RetrievalRanking ranking = model.score(query, model.experiment_ids());

  if (args.out.empty()) {
    sdpm::write_ranking_csv(std::cout, ranking, args.top_k);
  } else {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw sdpm::IoError("cannot open '" + args.out + "' for writing");
    sdpm::write_ranking_csv(out, ranking, args.top_k);
  }
  return 0;
}

// --- density -----------------------------------------------------------------

struct DensityArgs {
  std::string model;
  std::string grid;  // min:max:step, 1-D models
  std::string points_file;
  std::string out;
  std::string out_dir = default_out_dir().string();
};

int run_density(const DensityArgs& args) {
  json echo;
  echo["model"] = args.model;
  echo["grid"] = args.grid;
  echo["points"] = args.points_file;
  echo["out"] = args.out;
  echo_config(args.out_dir, "density", echo);

  sdpm::Supermodel model = sdpm::Supermodel::load_file(args.model);

  std::vector<sdpm::Vector> points;
  if (!args.grid.empty()) {
    if (model.dim() != 1)
      throw std::invalid_argument("--grid applies to 1-D models; use --points");
    double lo, hi, step;
    if (std::sscanf(args.grid.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0 ||
        hi < lo)
      throw std::invalid_argument("bad --grid specification '" + args.grid +
                                  "' (want min:max:step)");
    for (double x = lo; x <= hi + 1e-12; x += step) {
      sdpm::Vector v(1);
      v << x;
      points.push_back(v);
    }
  } else if (!args.points_file.empty()) {
    sdpm::SampleBatch pts = sdpm::io::read_batch(args.points_file);
    for (Eigen::Index i = 0; i < pts.samples.rows(); ++i)
      points.push_back(pts.samples.row(i).transpose());
  } else {
    throw std::invalid_argument("density: give --grid or --points");
  }

  std::vector<double> values = model.density(points);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out, std::ios::trunc);
    if (!file) throw sdpm::IoError("cannot open '" + args.out + "' for writing");
    out = &file;
  }
  for (int j = 0; j < model.dim(); ++j) *out << "x_" << (j + 1) << ',';
  *out << "density\n";
  char buf[64];
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int j = 0; j < model.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", points[i](j));
      *out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    *out << buf << '\n';
  }
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string batch_dir;
  std::string model;
  std::string baseline;
  int orders = 0;
  std::string out_dir = default_out_dir().string();
  std::string sweep_case;
  std::vector<double> etas;
  std::optional<int> dim, experiments, classes, draws;
  EngineFlags engine;
};

sdpm::Supermodel build_from_batches(const EngineFlags& engine,
                                    const std::vector<sdpm::SampleBatch>& batches) {
  sdpm::Supermodel model(batches.front().dim(), engine.to_config(batches.front().dim()));
  for (const auto& b : batches) model.ingest(b);
  return model;
}

int run_eval(const EvalArgs& args) {
  json echo = args.engine.to_json();
  echo["batch_dir"] = args.batch_dir;
  echo["model"] = args.model;
  echo["baseline"] = args.baseline;
  echo["orders"] = args.orders;
  echo["sweep_case"] = args.sweep_case;
  echo["etas"] = args.etas;
  echo_config(args.out_dir, "eval", echo);
  const fs::path out_dir(args.out_dir);

  if (!args.sweep_case.empty()) {
    // Prior-information sweep: simulate per eta, rebuild, evaluate.
    if (args.etas.empty()) throw std::invalid_argument("eval --sweep needs --etas");
    std::ofstream summary(out_dir / "sweep_summary.csv", std::ios::trunc);
    if (!summary) throw sdpm::IoError("cannot write sweep summary");
    summary << (args.baseline == "nsbl" ? "eta,map,map_nsbl\n" : "eta,map\n");
    for (double eta : args.etas) {
      sdpm::SimScenario s = args.sweep_case == "case1"
                                ? sdpm::SimScenario::case1_defaults()
                                : sdpm::SimScenario::case2_defaults();
      s.eta = eta;
      s.seed = args.engine.seed;
      if (args.dim) s.p = *args.dim;
      if (args.experiments) s.n_experiments = *args.experiments;
      if (args.classes) s.n_classes = *args.classes;
      if (args.draws) s.mcmc_draws = *args.draws;
      auto batches =
          args.sweep_case == "case1" ? sdpm::gen_case1(s) : sdpm::gen_case2(s);
      sdpm::Supermodel model = build_from_batches(args.engine, batches);
      sdpm::LooResult result = sdpm::leave_one_out(model, batches);

      char eta_buf[32];
      std::snprintf(eta_buf, sizeof(eta_buf), "%g", eta);
      sdpm::write_pr_csv(out_dir / ("pr_eta_" + std::string(eta_buf) + ".csv"),
                         result.pooled);
      char map_buf[64];
      std::snprintf(map_buf, sizeof(map_buf), "%.17g", result.map);
      summary << eta_buf << ',' << map_buf;
      if (args.baseline == "nsbl") {
        sdpm::LooResult base = sdpm::nsbl_leave_one_out(batches);
        std::snprintf(map_buf, sizeof(map_buf), "%.17g", base.map);
        summary << ',' << map_buf;
      }
      summary << '\n';
      std::printf("eta %-6g map %.4f\n", eta, result.map);
    }
    return 0;
  }

  if (args.batch_dir.empty()) throw std::invalid_argument("eval: give --batch-dir");
  std::vector<sdpm::SampleBatch> batches = load_batches({}, args.batch_dir);
  if (batches.size() < 2) throw std::invalid_argument("eval: need at least 2 batches");

  sdpm::Supermodel model = !args.model.empty() && fs::exists(args.model)
                               ? sdpm::Supermodel::load_file(args.model)
                               : build_from_batches(args.engine, batches);

  sdpm::LooResult result = sdpm::leave_one_out(model, batches);
  std::optional<sdpm::LooResult> baseline;
  if (args.baseline == "nsbl") baseline = sdpm::nsbl_leave_one_out(batches);

  std::optional<sdpm::OrderRobustness> orders;
  if (args.orders > 0) {
    auto builder = [&](const std::vector<sdpm::SampleBatch>& ordered) {
      return build_from_batches(args.engine, ordered);
    };
    orders = sdpm::order_robustness(builder, batches, args.orders, args.engine.seed);
  }

  sdpm::write_per_query_csv(out_dir / "per_query_ap.csv", result,
                            baseline ? &*baseline : nullptr);
  sdpm::write_pr_csv(out_dir / "pr_curve.csv", result.pooled);
  sdpm::write_summary_json(out_dir / "summary.json", result,
                           baseline ? &*baseline : nullptr, orders ? &*orders : nullptr);
  std::printf("map %.4f over %zu queries", result.map, result.per_query_ap.size());
  if (baseline) std::printf(" (nsbl %.4f)", baseline->map);
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming DPM supermodel over experiment posterior samples"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic batches");
  simulate->add_option("--case", sim.sim_case, "toy|case1|case2")
      ->required()
      ->check(CLI::IsMember({"toy", "case1", "case2"}));
  simulate->add_option("--out", sim.out, "output directory")->required();
  simulate->add_option("--seed", sim.seed, "simulation seed");
  simulate->add_option("--n", sim.toy_n, "toy: draws per mode");
  simulate->add_flag("--proportional", sim.proportional,
                     "toy: scale batch sizes by the mixture weights");
  simulate->add_flag("--scale-as-sd", sim.scale_as_sd,
                     "toy: read mode spreads as standard deviations");
  simulate->add_option("--eta", sim.eta, "prior informativeness in [0,1]");
  simulate->add_option("--dim", sim.dim, "parameter dimension");
  simulate->add_option("--experiments", sim.experiments, "number of experiments");
  simulate->add_option("--classes", sim.classes, "number of classes");
  simulate->add_option("--draws", sim.draws, "MCMC draws per experiment");
  simulate->add_option("--obs-min", sim.obs_min, "min observations per experiment");
  simulate->add_option("--obs-max", sim.obs_max, "max observations per experiment");
  simulate->add_option("--coeff-range", sim.coeff_range, "true-coefficient range");
  simulate->add_option("--noise-sd", sim.noise_sd, "observation noise sd");
  simulate->add_option("--burn-in", sim.burn_in, "case2: Gibbs burn-in");

  IngestArgs ing;
  CLI::App* ingest = app.add_subcommand("ingest", "absorb batches into a model file");
  ingest->add_option("--model", ing.model, "model file")->required();
  ingest->add_option("batches", ing.batches, "batch CSV files (ingested in order)");
  ingest->add_option("--batch-dir", ing.batch_dir, "directory of batch files");
  ingest->add_flag("--create", ing.create, "create the model if missing");
  ingest->add_option("--out-dir", ing.out_dir, "directory for the config echo");
  ing.engine.attach(ingest);

  QueryArgs qry;
  CLI::App* query = app.add_subcommand("query", "rank stored experiments for a query batch");
  query->add_option("--model", qry.model, "model file")->required();
  query->add_option("--batch", qry.batch, "query batch CSV")->required();
  query->add_option("--top", qry.top_k, "emit only the top K rows (0 = all)");
  query->add_option("--out", qry.out, "write the ranking CSV here instead of stdout");
  query->add_option("--out-dir", qry.out_dir, "directory for the config echo");

  DensityArgs den;
  CLI::App* density = app.add_subcommand("density", "evaluate the ensemble density");
  density->add_option("--model", den.model, "model file")->required();
  density->add_option("--grid", den.grid, "1-D evaluation grid min:max:step");
  density->add_option("--points", den.points_file, "CSV of evaluation points");
  density->add_option("--out", den.out, "write CSV here instead of stdout");
  density->add_option("--out-dir", den.out_dir, "directory for the config echo");

  EvalArgs evl;
  CLI::App* eval_cmd = app.add_subcommand("eval", "leave-one-out retrieval evaluation");
  eval_cmd->add_option("--batch-dir", evl.batch_dir, "directory of batch files");
  eval_cmd->add_option("--model", evl.model, "pre-built model file (else rebuild)");
  eval_cmd->add_option("--baseline", evl.baseline, "additional baseline: nsbl")
      ->check(CLI::IsMember({"", "nsbl"}));
  eval_cmd->add_option("--orders", evl.orders, "order-robustness reruns");
  eval_cmd->add_option("--out-dir", evl.out_dir, "report directory");
  eval_cmd->add_option("--sweep-case", evl.sweep_case, "eta sweep over case1|case2")
      ->check(CLI::IsMember({"case1", "case2"}));
  eval_cmd->add_option("--etas", evl.etas, "eta values for the sweep")->delimiter(',');
  eval_cmd->add_option("--dim", evl.dim, "sweep: parameter dimension");
  eval_cmd->add_option("--experiments", evl.experiments, "sweep: number of experiments");
  eval_cmd->add_option("--classes", evl.classes, "sweep: number of classes");
  eval_cmd->add_option("--draws", evl.draws, "sweep: MCMC draws per experiment");
  evl.engine.attach(eval_cmd);

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return run_simulate(sim);
    if (ingest->parsed()) return run_ingest(ing);
    if (query->parsed()) return run_query(qry);
    if (density->parsed()) return run_density(den);
    if (eval_cmd->parsed()) return run_eval(evl);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const sdpm::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
