#include "mvlab/config.hpp"

#include <sstream>

#include "mvlab/io.hpp"

namespace mvlab {

StrictMap::StrictMap(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
  if (node_ && !node_.IsNull() && !node_.IsMap())
    throw ConfigError("config section '" + path_ + "' (line " + std::to_string(line()) + ") must be a map");
}

bool StrictMap::has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

YAML::Node StrictMap::node(const std::string& key) {
  if (!has(key)) return YAML::Node();
  used_.insert(key);
  return node_[key];
}

void StrictMap::finish() const {
  if (!node_ || !node_.IsMap()) return;
  for (const auto& kv : node_) {
    const auto key = kv.first.as<std::string>();
    if (!used_.count(key))
      throw ConfigError("unknown config key '" + key_path(key) + "' (line " + std::to_string(kv.first.Mark().line + 1) +
                        ")");
  }
}

PorousMedia ModelSetup::build() const {
  return PorousMedia(SpectralSpace(space), ActionSpace::from_scalars(actions), coefficients);
}

Eigen::VectorXd ModelSetup::state_from_modes(const SpectralSpace& sp, const std::vector<double>& modes) const {
  if (static_cast<int>(modes.size()) > sp.size()) throw ConfigError("initial_state.modes has more entries than J");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(sp.size());
  for (std::size_t k = 0; k < modes.size(); ++k) c[static_cast<Eigen::Index>(k)] = modes[k];
  return sp.from_sine(c);
}

Eigen::VectorXd ModelSetup::initial_state(const SpectralSpace& sp) const { return state_from_modes(sp, initial_modes); }

namespace {

const char* const kSections[] = {"space", "constants", "coefficients", "sim", "picard", "initial_state"};

void apply_override(YAML::Node root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  YAML::Node cur = root;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool last = i + 1 == parts.size();
    if (cur.IsSequence()) {
      std::size_t idx;
      try {
        idx = std::stoul(parts[i]);
      } catch (const std::exception&) {
        throw ConfigError("override '" + path + "': '" + parts[i] + "' is not a sequence index");
      }
      if (idx >= cur.size()) throw ConfigError("override '" + path + "': index out of range");
      if (last) {
        cur[idx] = value;
      } else {
        YAML::Node next = cur[idx];
        cur.reset(next);
      }
    } else {
      if (last) {
        cur[parts[i]] = value;
      } else {
        if (!cur[parts[i]]) cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
        YAML::Node next = cur[parts[i]];
        cur.reset(next);
      }
    }
  }
}

NamedControl parse_control(const YAML::Node& n, std::size_t index) {
  StrictMap m(n, "controls." + std::to_string(index));
  NamedControl c;
  c.name = m.require<std::string>("name");
  int kinds = 0;
  if (m.has("dirac")) {
    c.rule = DiracControl{m.get<int>("dirac", 0)};
    ++kinds;
  }
  if (m.has("mixture")) {
    const auto v = m.get<std::vector<double>>("mixture", {});
    c.rule = MixtureControl{Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))};
    ++kinds;
  }
  if (m.has("feedback")) {
    StrictMap f(m.node("feedback"), m.key_path("feedback"));
    c.rule = FeedbackSignControl{f.require<int>("positive"), f.require<int>("negative")};
    f.finish();
    ++kinds;
  }
  if (m.has("fixed_path")) {
    const auto rows = m.get<std::vector<std::vector<double>>>("fixed_path", {});
    RelaxedControlPath rc;
    rc.cell_probs.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) throw ConfigError("controls." + std::to_string(index) + ".fixed_path: ragged rows");
      for (std::size_t k = 0; k < rows[r].size(); ++k)
        rc.cell_probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    }
    c.rule = FixedPathControl{rc};
    ++kinds;
  }
  if (kinds != 1)
    throw ConfigError("control '" + c.name + "' (line " + std::to_string(m.line()) +
                      ") needs exactly one of dirac, mixture, feedback, fixed_path");
  m.finish();
  return c;
}

ModelSetup parse_setup(const YAML::Node& root) {
  ModelSetup s;
  {
    StrictMap m(root["space"], "space");
    s.space.J = m.get("J", s.space.J);
    s.space.domain_length = m.get("domain_length", s.space.domain_length);
    s.space.q = m.get("q", s.space.q);
    s.space.dual_order_V = m.get("dual_order_V", s.space.dual_order_V);
    m.finish();
  }
  {
    StrictMap m(root["constants"], "constants");
    auto& k = s.space.constants;
    k.T = m.get("T", k.T);
    k.lambda = m.get("lambda", k.lambda);
    k.alpha = m.get("alpha", k.alpha);
    k.gamma = m.get("gamma", k.gamma);
    k.beta = m.get("beta", k.beta);
    k.eta = m.get("eta", k.eta);
    k.rho = m.get("rho", k.rho);
    if (m.has("C")) s.C = m.get("C", 0.0);
    m.finish();
  }
  s.space.validate();
  {
    StrictMap m(root["coefficients"], "coefficients");
    auto& p = s.coefficients;
    p.sigma0 = m.get("sigma0", p.sigma0);
    p.tau = m.get("tau", p.tau);
    p.bump_width = m.get("bump_width", p.bump_width);
    p.interaction = m.get("interaction", p.interaction);
    p.control_scale = m.get("control_scale", p.control_scale);
    p.anti_diffusion = m.get("anti_diffusion", p.anti_diffusion);
    s.actions = m.get("actions", s.actions);
    m.finish();
    p.validate();
    if (s.actions.empty()) throw ConfigError("coefficients.actions must be nonempty");
  }
  {
    StrictMap m(root["sim"], "sim");
    auto& c = s.sim;
    c.n_particles = m.get("n_particles", c.n_particles);
    c.M_steps = m.get("M_steps", c.M_steps);
    const auto policy = m.get<std::string>("dt_policy", "adaptive");
    if (policy == "fixed") {
      c.dt_policy = DtPolicy::Fixed;
    } else if (policy == "adaptive") {
      c.dt_policy = DtPolicy::Adaptive;
    } else {
      throw ConfigError("sim.dt_policy must be fixed or adaptive (got '" + policy + "')");
    }
    c.base_dt = m.get("base_dt", c.base_dt);
    c.noise_modes = m.get("noise_modes", c.noise_modes);
    if (m.has("cutoff_m")) c.cutoff_m = m.get("cutoff_m", 0.0);
    c.blowup_ceiling = m.get("blowup_ceiling", c.blowup_ceiling);
    m.finish();
    c.validate(s.space.J);
  }
  {
    StrictMap m(root["picard"], "picard");
    auto& o = s.picard;
    o.n_cloud = m.get("n_cloud", o.n_cloud);
    o.max_iter = m.get("max_iter", o.max_iter);
    o.tol = m.get("tol", o.tol);
    o.flow_refine = m.get("flow_refine", o.flow_refine);
    m.finish();
  }
  {
    StrictMap m(root["initial_state"], "initial_state");
    s.initial_modes = m.get("modes", s.initial_modes);
    m.finish();
    if (static_cast<int>(s.initial_modes.size()) > s.space.J)
      throw ConfigError("initial_state.modes has more entries than space.J");
  }
  if (const YAML::Node cl = root["controls"]) {
    if (!cl.IsSequence()) throw ConfigError("controls must be a list");
    for (std::size_t i = 0; i < cl.size(); ++i) {
      NamedControl c = parse_control(cl[i], i);
      if (auto* fp = std::get_if<FixedPathControl>(&c.rule)) {
        fp->path.times.resize(static_cast<std::size_t>(s.sim.M_steps) + 1);
        for (int m = 0; m <= s.sim.M_steps; ++m)
          fp->path.times[static_cast<std::size_t>(m)] =
              m == s.sim.M_steps ? s.space.constants.T : s.space.constants.T * m / s.sim.M_steps;
      }
      for (const auto& other : s.controls.members)
        if (other.name == c.name) throw ConfigError("duplicate control name '" + c.name + "'");
      s.controls.members.push_back(std::move(c));
    }
  }
  if (s.controls.members.empty()) s.controls.members.push_back({"idle", DiracControl{0}});
  s.controls.validate(static_cast<int>(s.actions.size()), s.sim.M_steps);
  return s;
}

std::string control_or_first(StrictMap& m, const ModelSetup& s) {
  const auto name = m.get<std::string>("control", s.controls.members.front().name);
  s.controls.find(name);
  return name;
}

void check_controls(const std::vector<std::string>& names, const ModelSetup& s) {
  for (const auto& n : names) s.controls.find(n);
}

ExperimentParams parse_params(const std::string& type, StrictMap& m, const ModelSetup& s) {
  if (type == "condition_check") {
    ConditionCheckParams p;
    p.samples = m.get("samples", p.samples);
    p.calibration_samples = m.get("calibration_samples", p.calibration_samples);
    p.margin = m.get("margin", p.margin);
    p.adversarial = m.get("adversarial", p.adversarial);
    if (p.samples < 1 || p.calibration_samples < 1 || !(p.margin >= 1))
      throw ConfigError("condition_check: samples >= 1 and margin >= 1 required");
    return p;
  }
  if (type == "heat_oracle") {
    HeatOracleParams p;
    p.options.J_list = m.get("J_list", p.options.J_list);
    p.options.T = m.get("T", p.options.T);
    p.options.dt_factor = m.get("dt_factor", p.options.dt_factor);
    p.options.temporal_J = m.get("temporal_J", p.options.temporal_J);
    p.options.dt_levels = m.get("dt_levels", p.options.dt_levels);
    p.min_spatial_order = m.get("min_spatial_order", p.min_spatial_order);
    p.min_temporal_order = m.get("min_temporal_order", p.min_temporal_order);
    return p;
  }
  if (type == "chaos") {
    ChaosParams p;
    p.control = control_or_first(m, s);
    p.options.n_list = m.get("n_list", p.options.n_list);
    p.options.replicates = m.get("replicates", p.options.replicates);
    p.options.rho = s.space.constants.rho;
    p.baseline = m.get("baseline", p.baseline);
    for (int n : p.options.n_list)
      if (n >= s.picard.n_cloud) throw ConfigError("chaos: every n must be below picard.n_cloud");
    return p;
  }
  if (type == "value") {
    ValueParams p;
    p.controls = m.get("controls", p.controls);
    check_controls(p.controls, s);
    p.options.n_list = m.get("n_list", p.options.n_list);
    p.options.replicates = m.get("replicates", p.options.replicates);
    p.options.proxy = m.get("proxy", p.options.proxy);
    p.options.picard = s.picard;
    if (p.options.replicates < 8) throw ConfigError("value: replicates must be >= 8");
    if (m.has("psi")) {
      StrictMap f(m.node("psi"), m.key_path("psi"));
      p.psi.type = f.get("type", p.psi.type);
      p.psi.clip = f.get("clip", p.psi.clip);
      p.psi.kappa = f.get("kappa", p.psi.kappa);
      p.psi.cost = f.get("cost", p.psi.cost);
      f.finish();
      if (p.psi.type != "terminal_moment" && p.psi.type != "running_cost" && p.psi.type != "zero")
        throw ConfigError("value.psi.type must be terminal_moment, running_cost or zero");
      if (p.psi.type == "running_cost" && p.psi.cost.size() != s.actions.size())
        throw ConfigError("value.psi.cost needs one entry per action");
    }
    return p;
  }
  if (type == "hausdorff") {
    HausdorffParams p;
    p.controls = m.get("controls", p.controls);
    check_controls(p.controls, s);
    p.options.n_list = m.get("n_list", p.options.n_list);
    p.options.replicates = m.get("replicates", p.options.replicates);
    p.options.rho = s.space.constants.rho;
    p.options.picard = s.picard;
    p.initial_states = m.get("initial_states", p.initial_states);
    p.probe_deltas = m.get("probe_deltas", p.probe_deltas);
    return p;
  }
  if (type == "martingale") {
    MartingaleParams p;
    p.control = control_or_first(m, s);
    p.steps = m.get("steps", p.steps);
    p.s_index = m.get("s_index", p.s_index);
    p.t_index = m.get("t_index", p.t_index);
    p.particles = m.get("particles", p.particles);
    p.mean_field = m.get("mean_field", p.mean_field);
    p.mean_field_cloud = m.get("mean_field_cloud", p.mean_field_cloud);
    p.deterministic_check = m.get("deterministic_check", p.deterministic_check);
    p.min_ratio = m.get("min_ratio", p.min_ratio);
    if (p.s_index < 0) p.s_index = p.steps / 4;
    if (p.t_index < 0) p.t_index = p.steps;
    if (p.mean_field && p.mean_field_cloud < 64) throw ConfigError("martingale: mean_field_cloud must be >= 64");
    if (p.steps < 2 || p.s_index >= p.t_index || p.t_index > p.steps)
      throw ConfigError("martingale: need 0 <= s_index < t_index <= steps");
    return p;
  }
  if (type == "moments") {
    MomentsParams p;
    p.control = control_or_first(m, s);
    p.p_list = m.get("p_list", p.p_list);
    p.write_ensemble = m.get("write_ensemble", p.write_ensemble);
    return p;
  }
  throw ConfigError("unknown experiment type '" + type + "' (line " + std::to_string(m.line()) +
                    "); expected condition_check, heat_oracle, chaos, value, hausdorff, martingale or moments");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("config root must be a map");
  for (const auto& o : overrides) apply_override(root, o);

  RunConfig rc;
  rc.overrides = overrides;
  std::string material = text;
  for (const auto& o : overrides) material += "\n--set " + o;
  rc.hash = sha256_hex(material);

  StrictMap top(root, "");
  rc.master_seed = top.get<std::uint64_t>("master_seed", rc.master_seed);
  rc.output_dir = top.get<std::string>("output_dir", rc.output_dir);
  for (const char* s : kSections) top.node(s);
  top.node("controls");
  rc.base = parse_setup(root);

  const YAML::Node ex = top.node("experiments");
  top.finish();
  if (ex && !ex.IsNull()) {
    if (!ex.IsSequence()) throw ConfigError("experiments must be a list");
    for (std::size_t i = 0; i < ex.size(); ++i) {
      StrictMap m(ex[i], "experiments." + std::to_string(i));
      ExperimentDecl d;
      d.name = m.require<std::string>("name");
      d.type = m.require<std::string>("type");
      for (const auto& other : rc.experiments)
        if (other.name == d.name) throw ConfigError("duplicate experiment name '" + d.name + "'");
      YAML::Node merged = YAML::Clone(root);
      merged.remove("experiments");
      for (const char* s : kSections) {
        if (!m.has(s)) continue;
        const YAML::Node sec = m.node(s);
        if (!sec.IsMap()) throw ConfigError("experiments." + std::to_string(i) + "." + s + " must be a map");
        if (!merged[s] || merged[s].IsNull()) merged[s] = YAML::Node(YAML::NodeType::Map);
        for (const auto& kv : sec) merged[s][kv.first.as<std::string>()] = kv.second;
      }
      try {
        d.setup = parse_setup(merged);
      } catch (const ConfigError& e) {
        throw ConfigError("experiment '" + d.name + "': " + e.what());
      }
      d.params = parse_params(d.type, m, d.setup);
      m.finish();
      rc.experiments.push_back(std::move(d));
    }
  }
  return rc;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  return parse_run_config(read_file(path), overrides);
}

}  // namespace mvlab
