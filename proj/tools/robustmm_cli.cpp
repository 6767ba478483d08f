#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "robustmm/errors.hpp"
#include "robustmm/json_io.hpp"
#include "robustmm/pipeline.hpp"

using robustmm::BalancedSample;
using robustmm::CalibrationResult;
using robustmm::RhoFunction;
using robustmm::RhoKind;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw robustmm::ParseError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw robustmm::ParseError("cannot write " + path);
  out << text << "\n";
}

RhoKind parse_family(const std::string& name) {
  if (name == "biweight") return RhoKind::Biweight;
  if (name == "huber") return RhoKind::Huber;
  throw robustmm::InvalidParams("family must be biweight or huber");
}

// rho1 selection shared by `fit` and `breakdown`
RhoFunction resolve_rho1(const std::string& family, int k, double efficiency, double winsorize,
                         double cutoff) {
  const RhoKind kind = parse_family(family);
  if (cutoff > 0.0) return RhoFunction(kind, cutoff);
  if (winsorize > 0.0) return RhoFunction(kind, robustmm::calibrate_winsorize(kind, k, winsorize).cutoff);
  return RhoFunction(kind, robustmm::calibrate_efficiency(kind, k, efficiency).cutoff);
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MM-estimation for balanced linear models with structured covariance"};
  app.require_subcommand(1);

  // ---- calibrate ----------------------------------------------------------
  std::string cal_family = "biweight";
  int cal_k = 1;
  double cal_breakdown = 0.0, cal_efficiency = 0.0, cal_winsorize = 0.0;
  auto* cal = app.add_subcommand("calibrate", "solve for a rho cut-off");
  cal->add_option("--family", cal_family, "biweight|huber")->capture_default_str();
  cal->add_option("--dim", cal_k, "response dimension k")->required();
  auto* opt_b = cal->add_option("--breakdown", cal_breakdown, "breakdown target r0 in (0,1/2]");
  auto* opt_e = cal->add_option("--efficiency", cal_efficiency, "efficiency target in (0,1)");
  auto* opt_w = cal->add_option("--winsorize", cal_winsorize, "Huber winsorizing proportion");
  opt_b->excludes(opt_e)->excludes(opt_w);
  opt_e->excludes(opt_w);

  // ---- inspect ------------------------------------------------------------
  std::string ins_data;
  auto* ins = app.add_subcommand("inspect", "sample metadata incl. kappa");
  ins->add_option("--data", ins_data, "long-format CSV")->required();

  // ---- fit ----------------------------------------------------------------
  std::string fit_data, fit_struct, fit_rho1 = "biweight", fit_out = "-";
  double fit_r0 = 0.5, fit_eff = 0.95, fit_wins = 0.0, fit_cutoff = 0.0;
  std::uint64_t fit_seed = 0;
  int fit_subsets = 500, fit_conc = 10, fit_extra = 20;
  auto* fit = app.add_subcommand("fit", "two-stage MM fit");
  fit->add_option("--data", fit_data)->required();
  fit->add_option("--structure", fit_struct, "structure descriptor JSON")->required();
  fit->add_option("--rho0-breakdown", fit_r0)->capture_default_str();
  fit->add_option("--rho1", fit_rho1, "biweight|huber")->capture_default_str();
  fit->add_option("--rho1-efficiency", fit_eff)->capture_default_str();
  fit->add_option("--rho1-winsorize", fit_wins);
  fit->add_option("--rho1-cutoff", fit_cutoff);
  fit->add_option("--seed", fit_seed)->required();
  fit->add_option("--n-subsets", fit_subsets)->capture_default_str();
  fit->add_option("--n-concentration", fit_conc)->capture_default_str();
  fit->add_option("--extra-starts", fit_extra)->capture_default_str();
  fit->add_option("--out", fit_out, "output path, - for stdout")->capture_default_str();

  // ---- influence ----------------------------------------------------------
  std::string inf_fit, inf_point;
  auto* inf = app.add_subcommand("influence", "influence function at a point");
  inf->add_option("--fit", inf_fit, "fit report JSON")->required();
  inf->add_option("--point", inf_point, "single-subject CSV")->required();

  // ---- breakdown ----------------------------------------------------------
  std::string bd_data, bd_struct, bd_grid = "0.0,0.1,0.2,0.3", bd_table = "-", bd_rho1 = "biweight";
  double bd_r0 = 0.5, bd_eff = 0.95;
  std::uint64_t bd_seed = 1;
  int bd_subsets = 200;
  auto* bd = app.add_subcommand("breakdown", "bound + contamination sweep");
  bd->add_option("--data", bd_data)->required();
  bd->add_option("--structure", bd_struct)->required();
  bd->add_option("--r0", bd_r0)->capture_default_str();
  bd->add_option("--rho1", bd_rho1)->capture_default_str();
  bd->add_option("--rho1-efficiency", bd_eff)->capture_default_str();
  bd->add_option("--grid", bd_grid, "comma-separated m/n fractions")->capture_default_str();
  bd->add_option("--seed", bd_seed)->capture_default_str();
  bd->add_option("--n-subsets", bd_subsets)->capture_default_str();
  bd->add_option("--table", bd_table, "CSV output path, - for stdout")->capture_default_str();

  // ---- simulate -----------------------------------------------------------
  std::string sim_spec, sim_out = "-", sim_table;
  int sim_reps = 100, sim_threads = 0, sim_cons_reps = 0;
  bool sim_consistency = false;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiment");
  sim->add_option("--spec", sim_spec, "generator + estimator spec JSON")->required();
  sim->add_option("--reps", sim_reps)->capture_default_str();
  sim->add_option("--threads", sim_threads)->capture_default_str();
  sim->add_option("--out", sim_out)->capture_default_str();
  sim->add_option("--table", sim_table, "per-replication CSV");
  sim->add_flag("--consistency", sim_consistency, "add the n in {100,400,1600} slope run");
  sim->add_option("--consistency-reps", sim_cons_reps)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal) {
      const RhoKind kind = parse_family(cal_family);
      CalibrationResult result;
      if (opt_b->count())
        result = robustmm::calibrate_breakdown(kind, cal_k, cal_breakdown);
      else if (opt_e->count())
        result = robustmm::calibrate_efficiency(kind, cal_k, cal_efficiency);
      else if (opt_w->count())
        result = robustmm::calibrate_winsorize(kind, cal_k, cal_winsorize);
      else
        throw robustmm::InvalidParams(
            "pass exactly one of --breakdown, --efficiency, --winsorize");
      std::cout << robustmm::to_json(result).dump(2) << "\n";
    } else if (*ins) {
      const BalancedSample sample = robustmm::load_csv(ins_data);
      std::cout << robustmm::sample_metadata_json(sample).dump(2) << "\n";
    } else if (*fit) {
      const BalancedSample sample = robustmm::load_csv(fit_data);
      const auto structure = robustmm::structure_from_json(read_json_file(fit_struct));
      const CalibrationResult stage0 =
          robustmm::calibrate_breakdown(RhoKind::Biweight, sample.k, fit_r0);
      const RhoFunction rho0 = RhoFunction::biweight(stage0.cutoff);
      const RhoFunction rho1 = resolve_rho1(fit_rho1, sample.k, fit_eff, fit_wins, fit_cutoff);
      robustmm::InitialConfig init;
      init.n_subsets = fit_subsets;
      init.n_concentration = fit_conc;
      init.seed = fit_seed;
      robustmm::MMConfig mm;
      mm.extra_starts = fit_extra;
      mm.seed = fit_seed;
      const robustmm::MMFit result =
          robustmm::fit_pipeline(sample, structure, rho0, stage0.b0, rho1, init, mm);
      const auto report = robustmm::asymptotic_covariance(result, sample, rho1);
      write_output(fit_out,
                   robustmm::fit_report_json(result, sample, rho0, stage0.b0, rho1, report)
                       .dump(2));
    } else if (*inf) {
      const json fj = read_json_file(inf_fit);
      const RhoFunction rho1(parse_family(fj.at("rho1").at("family").get<std::string>()),
                             fj.at("rho1").at("cutoff").get<double>());
      robustmm::MMFit fit_state;
      fit_state.beta1 = robustmm::vector_from_json(fj.at("beta1"));
      fit_state.initial.V0 = robustmm::matrix_from_json(fj.at("V0"));
      fit_state.converged = true;
      robustmm::AsymptoticReport rep;
      rep.alpha1 = fj.at("asymptotics").at("alpha1").get<double>();
      rep.info_matrix = robustmm::matrix_from_json(fj.at("asymptotics").at("info_matrix"));
      const BalancedSample pt = robustmm::load_csv(inf_point);
      if (pt.n != 1) throw robustmm::InvalidParams("point file must contain exactly one subject");
      const Eigen::VectorXd iff =
          robustmm::influence_function(fit_state, rep, pt.y[0], pt.X[0], rho1);
      std::cout << robustmm::to_json(iff).dump(2) << "\n";
    } else if (*bd) {
      const BalancedSample sample = robustmm::load_csv(bd_data);
      const auto structure = robustmm::structure_from_json(read_json_file(bd_struct));
      const CalibrationResult stage0 =
          robustmm::calibrate_breakdown(RhoKind::Biweight, sample.k, bd_r0);
      const RhoFunction rho0 = RhoFunction::biweight(stage0.cutoff);
      const RhoFunction rho1 = resolve_rho1(bd_rho1, sample.k, bd_eff, 0.0, 0.0);
      robustmm::SweepConfig cfg;
      cfg.seed = bd_seed;
      cfg.init.n_subsets = bd_subsets;
      cfg.init.seed = bd_seed;
      cfg.mm.seed = bd_seed;
      const auto rows = robustmm::contamination_sweep(sample, structure, rho0, stage0.b0, rho1,
                                                      parse_grid(bd_grid), cfg);
      std::ostringstream csv;
      csv << "m_over_n,magnitude,beta_dev,v_dist,exploded\n";
      for (const auto& r : rows) {
        if (!r.error.empty())
          csv << r.m_over_n << "," << r.magnitude << ",,," << "error:" << r.error << "\n";
        else
          csv << r.m_over_n << "," << r.magnitude << "," << r.beta_dev << "," << r.v_dist << ","
              << (r.exploded ? 1 : 0) << "\n";
      }
      write_output(bd_table, csv.str());
      const auto bound = robustmm::breakdown_bound(sample, bd_r0);
      std::cout << robustmm::to_json(bound).dump(2) << "\n";
    } else if (*sim) {
      const json sj = read_json_file(sim_spec);
      const robustmm::GeneratorSpec gspec = robustmm::generator_spec_from_json(sj);
      const robustmm::EstimatorConfig est = robustmm::estimator_config_from_json(
          sj.contains("estimator") ? sj.at("estimator") : json::object());
      robustmm::MonteCarloOptions opt;
      opt.replications = sim_reps;
      opt.threads = sim_threads;
      opt.keep_replicates = !sim_table.empty();
      if (sim_consistency) {
        opt.consistency_ns = {100, 400, 1600};
        opt.consistency_reps = sim_cons_reps > 0 ? sim_cons_reps : 100;
      }
      const auto report = robustmm::run_monte_carlo(gspec, est, opt);
      write_output(sim_out, robustmm::to_json(report).dump(2));
      if (!sim_table.empty()) {
        std::ostringstream csv;
        csv << "rep,ok";
        for (int j = 0; j < gspec.q; ++j) csv << ",beta" << (j + 1);
        for (int j = 0; j < gspec.q; ++j) csv << ",gls" << (j + 1);
        csv << "\n";
        for (const auto& r : report.replicates) {
          csv << r.rep << "," << (r.ok ? 1 : 0);
          for (int j = 0; j < gspec.q; ++j) csv << "," << (r.ok ? r.beta_mm[j] : 0.0);
          for (int j = 0; j < gspec.q; ++j) csv << "," << (r.ok ? r.beta_gls[j] : 0.0);
          csv << "\n";
        }
        write_output(sim_table, csv.str());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
