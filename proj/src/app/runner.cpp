#include "mvlab/runner.hpp"

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <Eigen/Core>

#include "mvlab/io.hpp"

namespace fs = std::filesystem;

namespace mvlab {

namespace {

std::ostream& out(const RunOptions& opts) { return opts.log ? *opts.log : std::cerr; }

struct Writer {
  fs::path dir;
  ExperimentOutcome* outcome;

  void json(const std::string& suffix, const nlohmann::json& j) {
    const std::string rel = outcome->name + suffix;
    write_json(dir / rel, j);
    outcome->files.push_back(rel);
  }
  void raw(const std::string& suffix, const std::string& bytes) {
    const std::string rel = outcome->name + suffix;
    write_file(dir / rel, bytes);
    outcome->files.push_back(rel);
  }
};

void require(bool ok, const std::string& invariant) {
  if (!ok) throw AssertionFailure(invariant);
}

SimConfig seeded(const ModelSetup& s, std::uint64_t seed) {
  SimConfig c = s.sim;
  c.rng_seed = seed;
  return c;
}

ControlFamily subfamily(const ModelSetup& s, const std::vector<std::string>& names) {
  if (names.empty()) return s.controls;
  ControlFamily f;
  for (const auto& n : names) f.members.push_back(s.controls.find(n));
  return f;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void run_condition_check(const ModelSetup& s, const ConditionCheckParams& p, std::uint64_t seed, Writer& w) {
  const PorousMedia cs = s.build();
  const auto& k = cs.space().config().constants;
  const auto cal = calibrate_constants(cs, k, p.calibration_samples, derive_seed(seed, 1), p.margin);
  const double C = s.C.value_or(cal.C);
  const auto r1 = check_condition_main1(cs, k, cal.lambda, p.samples, derive_seed(seed, 2));
  const auto r2 = check_condition_main2(cs, k, C, p.samples, derive_seed(seed, 3));
  const std::size_t scalar = scalar_monotonicity_violations(s.space.q, 100000, derive_seed(seed, 4));

  nlohmann::json j{{"q", s.space.q},
                   {"lambda", cal.lambda},
                   {"C", C},
                   {"C_calibrated", !s.C.has_value()},
                   {"coercivity_growth", r1.to_json()},
                   {"monotonicity_lipschitz", r2.to_json()},
                   {"scalar_monotonicity_violations", scalar},
                   {"violations", r1.total_violations() + r2.total_violations()}};
  std::ostringstream csv;
  csv << "condition,inequality,samples,violations,worst_margin,min_feasible_constant\n";
  auto rows = [&](const ConditionReport& r) {
    for (const auto& i : r.inequalities)
      csv << r.condition << ',' << i.name << ',' << i.samples << ',' << i.violations << ',' << fmt(i.worst_margin)
          << ',' << fmt(i.min_feasible_constant) << '\n';
  };
  rows(r1);
  rows(r2);

  std::size_t adversarial = 0;
  if (p.adversarial) {
    PorousMediaParams anti = s.coefficients;
    anti.anti_diffusion = true;
    const PorousMedia bad(cs.space(), cs.actions(), anti);
    const auto ra = check_condition_main2(bad, k, C, p.samples, derive_seed(seed, 5));
    adversarial = ra.total_violations();
    j["adversarial"] = ra.to_json();
    j["adversarial_violations"] = adversarial;
    rows(ra);
  }
  w.json(".json", j);
  w.raw(".csv", csv.str());
  require(r1.total_violations() == 0, "condition check: coercivity/growth violations = " +
                                          std::to_string(r1.total_violations()));
  require(r2.total_violations() == 0, "condition check: monotonicity/Lipschitz violations = " +
                                          std::to_string(r2.total_violations()));
  require(scalar == 0, "condition check: scalar monotonicity identity violated");
  require(!p.adversarial || adversarial >= 1, "condition check: adversarial instance was not falsified");
}

void run_heat(const HeatOracleParams& p, Writer& w) {
  const auto r = heat_oracle(p.options);
  nlohmann::json j = r.to_json();
  j["min_spatial_order"] = p.min_spatial_order;
  j["min_temporal_order"] = p.min_temporal_order;
  w.json(".json", j);
  std::ostringstream csv;
  csv << "study,step,error\n";
  for (std::size_t i = 0; i < r.h.size(); ++i) csv << "spatial," << fmt(r.h[i]) << ',' << fmt(r.spatial_error[i]) << '\n';
  for (std::size_t i = 0; i < r.dt.size(); ++i)
    csv << "temporal," << fmt(r.dt[i]) << ',' << fmt(r.temporal_error[i]) << '\n';
  w.raw(".csv", csv.str());
  require(r.spatial_order >= p.min_spatial_order, "heat oracle: spatial order " + fmt(r.spatial_order));
  require(r.temporal_order >= p.min_temporal_order, "heat oracle: temporal order " + fmt(r.temporal_order));
}

void run_chaos(const ModelSetup& s, const ChaosParams& p, std::uint64_t seed, Writer& w) {
  const PorousMedia cs = s.build();
  const auto& control = s.controls.find(p.control);
  const SimConfig cfg = seeded(s, seed);
  const Eigen::VectorXd x0 = s.initial_state(cs.space());
  const auto ref = picard_mckean(cs, control, cfg, x0, s.picard);
  std::optional<PicardResult> indep;
  if (p.baseline) indep = picard_mckean(cs, control, seeded(s, derive_seed(seed, lane_id("independent"))), x0, s.picard);
  const auto t = chaos_experiment(cs, control, cfg, x0, ref.ensemble, indep ? &indep->ensemble : nullptr, p.options);
  nlohmann::json j = t.to_json();
  j["control"] = p.control;
  j["picard"] = ref.to_json();
  j["decreasing_within_se"] = t.decreasing_within_se();
  j["last_over_first"] = t.last_over_first();
  w.json(".json", j);
  w.raw(".csv", t.to_csv());
}

TestFunctional make_psi(const PsiDecl& d, const SpectralSpace& space) {
  if (d.type == "zero") return zero_functional();
  if (d.type == "running_cost")
    return running_cost(space, space.eigenfunction(1),
                        Eigen::Map<const Eigen::VectorXd>(d.cost.data(), static_cast<Eigen::Index>(d.cost.size())),
                        d.kappa);
  return terminal_moment(d.clip);
}

void run_value(const ModelSetup& s, const ValueParams& p, std::uint64_t seed, Writer& w) {
  const PorousMedia cs = s.build();
  const auto family = subfamily(s, p.controls);
  const auto r = value_function(cs, family, seeded(s, seed), s.initial_state(cs.space()),
                                make_psi(p.psi, cs.space()), p.options);
  nlohmann::json j = r.to_json();
  nlohmann::json gaps = nlohmann::json::array();
  for (int n : p.options.n_list) gaps.push_back({{"n", n}, {"gap", r.gap(n)}, {"gap_se", r.gap_se(n)}});
  j["gaps"] = gaps;
  w.json(".json", j);
  w.raw(".csv", r.to_csv());
}

void run_hausdorff(const ModelSetup& s, const HausdorffParams& p, std::uint64_t seed, Writer& w) {
  const PorousMedia cs = s.build();
  const auto& sp = cs.space();
  std::vector<Eigen::VectorXd> xs;
  for (const auto& modes : p.initial_states) xs.push_back(s.state_from_modes(sp, modes));
  if (xs.empty()) xs.push_back(s.initial_state(sp));
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> probes;
  for (double d : p.probe_deltas) probes.emplace_back(xs.front(), xs.front() + d * sp.eigenfunction(1));
  const auto t = hausdorff_experiment(cs, subfamily(s, p.controls), seeded(s, seed), xs, probes, p.options);
  nlohmann::json j = t.to_json();
  j["continuity_monotone"] = t.continuity_monotone();
  w.json(".json", j);
  w.raw(".csv", t.to_csv());
}

void run_martingale(const ModelSetup& s, const MartingaleParams& p, std::uint64_t seed, Writer& w) {
  const PorousMedia cs = s.build();
  const auto& control = s.controls.find(p.control);
  const SimConfig cfg = seeded(s, seed);
  const Eigen::VectorXd x0 = s.initial_state(cs.space());
  const auto specs = builtin_panel(cs.space(), p.s_index, p.t_index);
  PicardOptions mf = s.picard;
  mf.n_cloud = p.mean_field_cloud;

  nlohmann::json j{{"control", p.control}, {"steps", p.steps}, {"s_index", p.s_index}, {"t_index", p.t_index}};
  std::string csv = "source,id,estimate,se,bias,band,pass\n";
  std::vector<std::string> failed;
  auto panel = [&](ResidualSource src) {
    const auto r = martingale_panel(cs, control, cfg, x0, specs, p.steps, src, mf);
    j[r.source] = r.to_json();
    for (const auto& row : r.rows) {
      csv += r.source + ',' + row.id + ',' + fmt(row.estimate) + ',' + fmt(row.se) + ',' + fmt(row.bias) + ',' +
             fmt(row.band) + ',' + (row.pass ? "1" : "0") + '\n';
      if (!row.pass) failed.push_back(r.source + ":" + row.id);
    }
  };
  if (p.particles) panel(ResidualSource::Particles);
  if (p.mean_field) panel(ResidualSource::MeanField);
  if (p.deterministic_check) {
    PorousMediaParams quiet = s.coefficients;
    quiet.sigma0 = 0.0;
    const PorousMedia cq(cs.space(), cs.actions(), quiet);
    const auto ratios = dt_halving_ratios(cq, control, cfg, x0, specs, p.steps);
    j["deterministic_ratios"] = ratios;
    j["min_ratio"] = p.min_ratio;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      csv += "deterministic," + specs[i].id + ",,,,," + (ratios[i] >= p.min_ratio ? "1" : "0") + '\n';
      if (!(ratios[i] >= p.min_ratio)) failed.push_back("deterministic:" + specs[i].id);
    }
  }
  j["failed"] = failed;
  w.json(".json", j);
  w.raw(".csv", csv);
  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    throw AssertionFailure("martingale panel: band violated for " + names);
  }
}

void run_moments(const ModelSetup& s, const MomentsParams& p, std::uint64_t seed, Writer& w) {
  const PorousMedia cs = s.build();
  const auto& control = s.controls.find(p.control);
  ModelConstants k = cs.space().config().constants;
  const auto cal = calibrate_constants(cs, k, 2000, derive_seed(seed, 1), 2.0);
  k.lambda = cal.lambda;
  const Ensemble e = simulate_particles(cs, control, seeded(s, seed), s.initial_state(cs.space()));
  const auto r = moment_report(cs.space(), e, p.p_list, k);
  nlohmann::json j = r.to_json();
  j["lambda"] = k.lambda;
  j["control"] = p.control;
  w.json(".json", j);
  std::ostringstream csv;
  csv << "p,empirical,log_bound,pass\n";
  for (const auto& l : r.lines) csv << fmt(l.p) << ',' << fmt(l.empirical) << ',' << fmt(l.log_bound) << ',' << l.pass << '\n';
  w.raw(".csv", csv.str());
  if (p.write_ensemble) w.raw(".ens", encode_ensemble(e));
  for (const auto& l : r.lines)
    require(l.pass, "moment audit: empirical moment exceeds the bound at p = " + fmt(l.p));
  require(r.j_pass, "moment audit: J functional exceeds j-hat");
}

void run_one(const ExperimentDecl& d, std::uint64_t seed, Writer& w) {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ConditionCheckParams>) run_condition_check(d.setup, p, seed, w);
        else if constexpr (std::is_same_v<P, HeatOracleParams>) run_heat(p, w);
        else if constexpr (std::is_same_v<P, ChaosParams>) run_chaos(d.setup, p, seed, w);
        else if constexpr (std::is_same_v<P, ValueParams>) run_value(d.setup, p, seed, w);
        else if constexpr (std::is_same_v<P, HausdorffParams>) run_hausdorff(d.setup, p, seed, w);
        else if constexpr (std::is_same_v<P, MartingaleParams>) run_martingale(d.setup, p, seed, w);
        else run_moments(d.setup, p, seed, w);
      },
      d.params);
}

std::string versions_compiler() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

fs::path resolve_output_dir(const RunConfig& rc, const RunOptions& opts) {
  if (!opts.output_dir.empty()) return opts.output_dir;
  if (const char* env = std::getenv("MVLAB_OUTPUT_DIR"); env && *env) return env;
  return rc.output_dir;
}

void apply_threads(const RunOptions& opts) {
  if (opts.threads > 0) omp_set_num_threads(opts.threads);
}

}  // namespace

std::uint64_t experiment_seed(std::uint64_t master_seed, const std::string& name) {
  return derive_seed(master_seed, lane_id(name.c_str()));
}

RunResult run_config(const RunConfig& rc, const fs::path& config_path, const fs::path& output_dir,
                     const RunOptions& opts) {
  apply_threads(opts);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.output_dir = output_dir;
  fs::create_directories(output_dir);

  nlohmann::json exps = nlohmann::json::array();
  bool assertion = false, blowup = false, config = false;
  for (const auto& d : rc.experiments) {
    ExperimentOutcome o;
    o.name = d.name;
    o.type = d.type;
    Writer w{output_dir, &o};
    const std::uint64_t seed = experiment_seed(rc.master_seed, d.name);
    const auto e0 = std::chrono::steady_clock::now();
    out(opts) << "[" << d.name << "] " << d.type << " ..." << std::endl;
    try {
      run_one(d, seed, w);
    } catch (const AssertionFailure& e) {
      o.status = "assertion_failed";
      o.message = e.what();
      assertion = true;
    } catch (const BlowUpError& e) {
      o.status = "blow_up";
      o.message = "experiment '" + d.name + "': " + e.what() + " (step " + std::to_string(e.step()) + ", t = " +
                  fmt(e.time()) + ")";
      blowup = true;
    } catch (const std::exception& e) {
      o.status = "config_error";
      o.message = "experiment '" + d.name + "': " + e.what();
      config = true;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
    out(opts) << "[" << d.name << "] " << o.status << (o.message.empty() ? "" : ": " + o.message) << " (" << secs
              << " s)" << std::endl;
    exps.push_back({{"name", o.name},
                    {"type", o.type},
                    {"seed", seed},
                    {"status", o.status},
                    {"message", o.message},
                    {"seconds", secs}});
    res.experiments.push_back(std::move(o));
  }

  nlohmann::json files = nlohmann::json::array();
  for (const auto& o : res.experiments)
    for (const auto& f : o.files) files.push_back({{"path", f}, {"sha256", sha256_file(output_dir / f)}});

  res.exit_code = config ? kExitConfig : blowup ? kExitBlowUp : assertion ? kExitAssertion : kExitOk;
  res.manifest = {{"version", kVersion},
                  {"versions",
                   {{"mvlab", kVersion},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", versions_compiler()}}},
                  {"config_path", fs::absolute(config_path).lexically_normal().string()},
                  {"config_hash", rc.hash},
                  {"overrides", rc.overrides},
                  {"master_seed", rc.master_seed},
                  {"threads", omp_get_max_threads()},
                  {"experiments", exps},
                  {"files", files},
                  {"exit_code", res.exit_code},
                  {"wall_clock_seconds",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  res.manifest_path = output_dir / "manifest.json";
  write_json(res.manifest_path, res.manifest);
  return res;
}

int run_command(const fs::path& config_path, const RunOptions& opts) {
  RunConfig rc;
  try {
    rc = load_run_config(config_path, opts.overrides);
  } catch (const ConfigError& e) {
    out(opts) << "config error: " << e.what() << std::endl;
    return kExitConfig;
  }
  const auto res = run_config(rc, config_path, resolve_output_dir(rc, opts), opts);
  out(opts) << "manifest: " << res.manifest_path.string() << std::endl;
  return res.exit_code;
}

int check_command(const fs::path& config_path, const RunOptions& opts) {
  try {
    const auto rc = load_run_config(config_path, opts.overrides);
    out(opts) << "config ok: " << rc.experiments.size() << " experiment(s), hash " << rc.hash << std::endl;
    return kExitOk;
  } catch (const ConfigError& e) {
    out(opts) << "config error: " << e.what() << std::endl;
    return kExitConfig;
  }
}

ReplayResult replay(const fs::path& manifest_path, const RunOptions& opts) {
  ReplayResult rr;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest '" + manifest_path.string() + "' is not valid JSON: " + e.what());
  }
  const fs::path config_path = m.at("config_path").get<std::string>();
  const auto overrides = m.at("overrides").get<std::vector<std::string>>();
  const RunConfig rc = load_run_config(config_path, overrides);
  rr.config_hash_match = rc.hash == m.at("config_hash").get<std::string>();
  if (!rr.config_hash_match) {
    rr.exit_code = kExitConfig;
    rr.diff.push_back("config hash mismatch: manifest " + m.at("config_hash").get<std::string>() + ", current " +
                      rc.hash);
    return rr;
  }
  if (rc.master_seed != m.at("master_seed").get<std::uint64_t>())
    throw ConfigError("manifest master_seed differs from the config");
  rr.output_dir = opts.output_dir.empty() ? manifest_path.parent_path() / "replay" : fs::path(opts.output_dir);
  const auto res = run_config(rc, config_path, rr.output_dir, opts);

  std::map<std::string, std::string> before, after;
  for (const auto& f : m.at("files")) before[f.at("path")] = f.at("sha256");
  for (const auto& f : res.manifest.at("files")) after[f.at("path")] = f.at("sha256");
  for (const auto& [path, hash] : before) {
    const auto it = after.find(path);
    if (it == after.end()) rr.diff.push_back(path + ": missing in replay");
    else if (it->second != hash) rr.diff.push_back(path + ": sha256 " + hash + " -> " + it->second);
  }
  for (const auto& [path, hash] : after)
    if (!before.count(path)) rr.diff.push_back(path + ": not in the original manifest");
  const int recorded = m.value("exit_code", 0);
  if (res.exit_code != recorded)
    rr.diff.push_back("exit code " + std::to_string(recorded) + " -> " + std::to_string(res.exit_code));
  rr.exit_code = rr.diff.empty() ? kExitOk : kExitAssertion;
  write_json(rr.output_dir / "replay_report.json",
             {{"manifest", fs::absolute(manifest_path).lexically_normal().string()},
              {"match", rr.diff.empty()},
              {"threads", omp_get_max_threads()},
              {"diff", rr.diff}});
  return rr;
}

int replay_command(const fs::path& manifest_path, const RunOptions& opts) {
  try {
    const auto rr = replay(manifest_path, opts);
    for (const auto& d : rr.diff) out(opts) << "replay diff: " << d << std::endl;
    out(opts) << (rr.exit_code == kExitOk ? "replay: match" : "replay: MISMATCH") << std::endl;
    return rr.exit_code;
  } catch (const ConfigError& e) {
    out(opts) << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    out(opts) << "replay error: " << e.what() << std::endl;
    return kExitConfig;
  }
}

}  // namespace mvlab
