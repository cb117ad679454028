#include "rodeepc/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace rodeepc {

using nlohmann::json;

const char* to_string(BenchmarkKind b) {
  switch (b) {
    case BenchmarkKind::ltv: return "ltv";
    case BenchmarkKind::rollover: return "rollover";
    case BenchmarkKind::custom: return "custom";
  }
  return "unknown";
}

Vector PiecewiseSignal::at(Index k) const {
  if (points.empty()) throw ConfigError("piecewise signal has no breakpoints");
  if (period) k = ((k % *period) + *period) % *period;
  const Vector* v = &points.front().second;
  for (const auto& p : points) {
    if (p.first > k) break;
    v = &p.second;
  }
  return *v;
}

Matrix PiecewiseSignal::window(Index k, Index n) const {
  Matrix w(dim(), n);
  for (Index i = 0; i < n; ++i) w.col(i) = at(k + i);
  return w;
}

LtvPlant ExperimentConfig::make_plant() const {
  LtvPlant plant;
  switch (benchmark) {
    case BenchmarkKind::ltv: plant = make_ltv_benchmark(); break;
    case BenchmarkKind::rollover: plant = make_rollover_benchmark(sampling_time); break;
    case BenchmarkKind::custom: {
      const Index n = custom_a0.rows();
      Matrix da = custom_da.size() ? custom_da : Matrix::Zero(n, n);
      Matrix db = custom_db.size() ? custom_db : Matrix::Zero(n, custom_b0.cols());
      plant = LtvPlant(custom_a0, custom_b0, custom_c, da, db, Vector::Zero(n));
      break;
    }
  }
  if (initial_state) plant.set_initial_state(*initial_state);
  plant.set_schedule(schedule);
  return plant;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (benchmark == BenchmarkKind::custom && (custom_a0.size() == 0 || custom_b0.size() == 0 ||
                                             custom_c.size() == 0))
    throw ConfigError("custom benchmark requires plant.A0, plant.B0 and plant.C");
  const LtvPlant plant = make_plant();
  DeePCConfig d = deepc;
  if (plant.input_dim() != d.input_dim || plant.output_dim() != d.output_dim)
    throw ConfigError("controller dimensions (m=" + std::to_string(d.input_dim) + ", p=" +
                      std::to_string(d.output_dim) + ") do not match the plant (m=" +
                      std::to_string(plant.input_dim()) + ", p=" +
                      std::to_string(plant.output_dim()) + ")");
  d.normalize();
  if (duration <= d.t_ini + d.horizon) throw ConfigError("duration must exceed T_ini + N");
  if (offline_lengths.empty()) throw ConfigError("offline.lengths must not be empty");
  for (Index t : offline_lengths)
    if (t < d.depth()) throw ConfigError("offline segment shorter than T_ini + N");
  if (output_reference.dim() != d.output_dim)
    throw ConfigError("output reference must have p entries per breakpoint");
  if (input_reference && input_reference->dim() != d.input_dim)
    throw ConfigError("input reference must have m entries per breakpoint");
  if (metric == TrackingMetric::input && !input_reference)
    throw ConfigError("input tracking metric requires reference.input");
  if (warmup.kind == WarmupKind::constant && warmup.value.size() != 1 &&
      warmup.value.size() != d.input_dim)
    throw ConfigError("warmup value must have 1 or m entries");
  if (noise_bound < 0.0) throw ConfigError("noise bound must be >= 0");
}

ExperimentConfig default_config(BenchmarkKind kind) {
  ExperimentConfig c;
  c.benchmark = kind;
  DeePCConfig& d = c.deepc;
  switch (kind) {
    case BenchmarkKind::ltv:
      d.t_ini = 35;
      d.horizon = 45;
      d.input_dim = 2;
      d.output_dim = 2;
      d.state_dim_bound = 4;
      c.duration = 2100;
      c.warmup = WarmupPolicy{WarmupKind::zero, Vector()};
      c.output_reference.points = {{0, Vector::Zero(2)}};
      break;
    case BenchmarkKind::rollover:
      d.t_ini = 10;
      d.horizon = 15;
      d.input_dim = 1;
      d.output_dim = 1;
      d.state_dim_bound = 4;
      d.output_box = ChannelBox::symmetric(1, 1.0);
      c.duration = 1200;
      c.warmup = WarmupPolicy{WarmupKind::constant, Vector::Constant(1, 55.0)};
      c.output_reference.points = {{0, Vector::Zero(1)}};
      c.violation_bound = 1.0;
      break;
    case BenchmarkKind::custom:
      c.output_reference.points = {{0, Vector::Zero(1)}};
      break;
  }
  return c;
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double to_real(const json& j, double null_value, const std::string& where) {
  if (j.is_null()) return null_value;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ConfigError(where + " must be a number, \"inf\", \"-inf\" or null");
}

Vector to_vector(const json& j, Index dim, const std::string& where) {
  if (j.is_array()) {
    if (dim >= 0 && static_cast<Index>(j.size()) != dim)
      throw ConfigError(where + " must have " + std::to_string(dim) + " entries");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = to_real(j[i], 0.0, where);
    return v;
  }
  if (dim < 0) throw ConfigError(where + " must be an array");
  return Vector::Constant(dim, to_real(j, 0.0, where));
}

Matrix to_matrix(const json& j, Index rows, Index cols, const std::string& where) {
  if (j.is_number()) {
    if (rows != cols) throw ConfigError(where + ": scalar shorthand needs a square matrix");
    return j.get<double>() * Matrix::Identity(rows, cols);
  }
  if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a number or nested array");
  if (!j[0].is_array()) {
    // A flat array is a diagonal.
    const Vector d = to_vector(j, rows, where);
    if (rows != cols) throw ConfigError(where + ": diagonal shorthand needs a square matrix");
    return d.asDiagonal();
  }
  const auto r = static_cast<Index>(j.size());
  const auto c = static_cast<Index>(j[0].size());
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols))
    throw ConfigError(where + " has wrong shape");
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_array() ||
        static_cast<Index>(j[static_cast<std::size_t>(i)].size()) != c)
      throw ConfigError(where + " rows must all have the same length");
    for (Index k = 0; k < c; ++k)
      m(i, k) = to_real(j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)], 0.0, where);
  }
  return m;
}

ChannelBox to_box(const json& j, Index dim, const std::string& where) {
  if (j.is_null()) return ChannelBox::unbounded(dim);
  if (j.is_number() || j.is_string()) {
    const double b = to_real(j, kInf, where);
    return ChannelBox::symmetric(dim, std::abs(b));
  }
  check_keys(j, {"lower", "upper"}, where);
  ChannelBox box = ChannelBox::unbounded(dim);
  if (j.contains("lower")) {
    box.lower = j["lower"].is_array() ? to_vector(j["lower"], dim, where + ".lower")
                                      : Vector::Constant(dim, to_real(j["lower"], -kInf, where));
  }
  if (j.contains("upper")) {
    box.upper = j["upper"].is_array() ? to_vector(j["upper"], dim, where + ".upper")
                                      : Vector::Constant(dim, to_real(j["upper"], kInf, where));
  }
  return box;
}

std::optional<Index> to_period(const json& j) {
  if (!j.contains("period") || j["period"].is_null()) return std::nullopt;
  return j["period"].get<Index>();
}

LambdaSchedule to_schedule(const json& j) {
  if (j.is_number()) return LambdaSchedule::constant(j.get<double>());
  check_keys(j, {"breakpoints", "period"}, "plant.schedule");
  std::vector<std::pair<Index, double>> pts;
  for (const auto& bp : j.at("breakpoints")) {
    if (!bp.is_array() || bp.size() != 2) throw ConfigError("schedule breakpoints are [step, value]");
    pts.emplace_back(bp[0].get<Index>(), bp[1].get<double>());
  }
  return LambdaSchedule(std::move(pts), to_period(j));
}

PiecewiseSignal to_signal(const json& j, Index dim, const std::string& where) {
  PiecewiseSignal s;
  if (j.is_number() || (j.is_array() && (j.empty() || !j[0].is_array()))) {
    s.points = {{0, to_vector(j, dim, where)}};
    return s;
  }
  check_keys(j, {"breakpoints", "period"}, where);
  Index last = -1;
  for (const auto& bp : j.at("breakpoints")) {
    if (!bp.is_array() || bp.size() != 2) throw ConfigError(where + " breakpoints are [step, value]");
    const auto k = bp[0].get<Index>();
    if (k <= last) throw ConfigError(where + " breakpoints must be strictly increasing");
    last = k;
    s.points.emplace_back(k, to_vector(bp[1], dim, where));
  }
  if (s.points.empty()) throw ConfigError(where + " needs at least one breakpoint");
  s.period = to_period(j);
  if (s.period && *s.period <= last) throw ConfigError(where + " period must exceed last breakpoint");
  return s;
}

void parse_deepc(const json& j, DeePCConfig& d) {
  check_keys(j,
             {"t_ini", "horizon", "state_dim_bound", "output_weight", "input_weight", "reg_g",
              "reg_slack", "input_box", "output_box", "pin_slack", "sigma_thr", "rank_floor",
              "gate_reduced", "gate_engine", "svd", "qp"},
             "deepc");
  if (j.contains("t_ini")) d.t_ini = j["t_ini"].get<Index>();
  if (j.contains("horizon")) d.horizon = j["horizon"].get<Index>();
  if (j.contains("state_dim_bound")) d.state_dim_bound = j["state_dim_bound"].get<Index>();
  if (j.contains("output_weight"))
    d.output_weight = to_matrix(j["output_weight"], d.output_dim, d.output_dim, "deepc.output_weight");
  if (j.contains("input_weight"))
    d.input_weight = to_matrix(j["input_weight"], d.input_dim, d.input_dim, "deepc.input_weight");
  if (j.contains("reg_g")) d.reg_g = to_real(j["reg_g"], 0.0, "deepc.reg_g");
  if (j.contains("reg_slack")) d.reg_slack = to_real(j["reg_slack"], 0.0, "deepc.reg_slack");
  if (j.contains("input_box")) d.input_box = to_box(j["input_box"], d.input_dim, "deepc.input_box");
  if (j.contains("output_box"))
    d.output_box = to_box(j["output_box"], d.output_dim, "deepc.output_box");
  if (j.contains("pin_slack")) d.pin_slack = j["pin_slack"].get<bool>();
  if (j.contains("sigma_thr")) d.sigma_thr = to_real(j["sigma_thr"], kInf, "deepc.sigma_thr");
  if (j.contains("rank_floor")) d.rank_floor = j["rank_floor"].get<Index>();
  if (j.contains("gate_reduced")) d.gate_reduced = j["gate_reduced"].get<bool>();
  if (j.contains("gate_engine")) d.gate_engine = parse_gate_engine(j["gate_engine"].get<std::string>());
  if (j.contains("svd")) {
    const json& s = j["svd"];
    check_keys(s, {"rel_tol", "orth_tol", "reorth_interval", "core"}, "deepc.svd");
    if (s.contains("rel_tol")) d.svd.rel_tol = s["rel_tol"].get<double>();
    if (s.contains("orth_tol")) d.svd.orth_tol = s["orth_tol"].get<double>();
    if (s.contains("reorth_interval")) d.svd.reorth_interval = s["reorth_interval"].get<int>();
    if (s.contains("core")) {
      const auto c = s["core"].get<std::string>();
      if (c == "secular") d.svd.core = CoreSolver::secular;
      else if (c == "dense") d.svd.core = CoreSolver::dense;
      else throw ConfigError("deepc.svd.core must be \"secular\" or \"dense\"");
    }
  }
  if (j.contains("qp")) {
    const json& q = j["qp"];
    check_keys(q, {"tol", "max_iter", "sigma", "alpha", "rho", "check_interval", "polish", "warm_start"},
               "deepc.qp");
    if (q.contains("tol")) d.qp.tol = q["tol"].get<double>();
    if (q.contains("max_iter")) d.qp.max_iter = q["max_iter"].get<int>();
    if (q.contains("sigma")) d.qp.sigma = q["sigma"].get<double>();
    if (q.contains("alpha")) d.qp.alpha = q["alpha"].get<double>();
    if (q.contains("rho")) d.qp.rho = q["rho"].get<double>();
    if (q.contains("check_interval")) d.qp.check_interval = q["check_interval"].get<int>();
    if (q.contains("polish")) d.qp.polish = q["polish"].get<bool>();
    if (q.contains("warm_start")) d.qp.warm_start = q["warm_start"].get<bool>();
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  try {
    check_keys(j,
               {"benchmark", "controller", "duration", "seeds", "workers", "output_dir",
                "write_traces", "deepc", "plant", "offline", "warmup", "reference", "metric",
                "violation_bound"},
               "config");
    const std::string bench = j.value("benchmark", std::string("ltv"));
    BenchmarkKind kind;
    if (bench == "ltv") kind = BenchmarkKind::ltv;
    else if (bench == "rollover") kind = BenchmarkKind::rollover;
    else if (bench == "custom") kind = BenchmarkKind::custom;
    else throw ConfigError("unknown benchmark '" + bench + "'");
    ExperimentConfig c = default_config(kind);

    if (j.contains("plant")) {
      const json& p = j["plant"];
      check_keys(p,
                 {"sampling_time", "noise_bound", "initial_state", "schedule", "A0", "B0", "C",
                  "drift_A", "drift_B"},
                 "plant");
      if (p.contains("sampling_time")) c.sampling_time = p["sampling_time"].get<double>();
      if (p.contains("noise_bound")) c.noise_bound = p["noise_bound"].get<double>();
      if (p.contains("schedule")) c.schedule = to_schedule(p["schedule"]);
      if (kind == BenchmarkKind::custom) {
        c.custom_a0 = to_matrix(p.at("A0"), -1, -1, "plant.A0");
        const Index n = c.custom_a0.rows();
        c.custom_b0 = to_matrix(p.at("B0"), n, -1, "plant.B0");
        c.custom_c = to_matrix(p.at("C"), -1, n, "plant.C");
        if (p.contains("drift_A")) c.custom_da = to_matrix(p["drift_A"], n, n, "plant.drift_A");
        if (p.contains("drift_B"))
          c.custom_db = to_matrix(p["drift_B"], n, c.custom_b0.cols(), "plant.drift_B");
        c.deepc.input_dim = c.custom_b0.cols();
        c.deepc.output_dim = c.custom_c.rows();
        c.deepc.state_dim_bound = n;
        c.output_reference.points = {{0, Vector::Zero(c.deepc.output_dim)}};
      } else {
        for (const char* k : {"A0", "B0", "C", "drift_A", "drift_B"})
          if (p.contains(k)) throw ConfigError(std::string("plant.") + k + " is only valid for custom");
      }
      if (p.contains("initial_state")) c.initial_state = to_vector(p["initial_state"], -1, "plant.initial_state");
    }
    if (j.contains("controller")) c.controller = parse_variant(j["controller"].get<std::string>());
    if (j.contains("duration")) c.duration = j["duration"].get<Index>();
    if (j.contains("seeds")) {
      c.seeds.clear();
      for (const auto& s : j["seeds"]) c.seeds.push_back(s.get<std::uint64_t>());
    }
    if (j.contains("workers")) c.workers = j["workers"].get<int>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("write_traces")) c.write_traces = j["write_traces"].get<bool>();
    if (j.contains("metric")) {
      const auto m = j["metric"].get<std::string>();
      if (m == "output") c.metric = TrackingMetric::output;
      else if (m == "input") c.metric = TrackingMetric::input;
      else throw ConfigError("metric must be \"output\" or \"input\"");
    }
    if (j.contains("violation_bound")) c.violation_bound = to_real(j["violation_bound"], kInf, "violation_bound");
    if (j.contains("deepc")) parse_deepc(j["deepc"], c.deepc);
    if (j.contains("offline")) {
      const json& o = j["offline"];
      check_keys(o, {"lengths", "amplitude", "offset", "hold", "lambda", "noise", "seed_offset", "retries",
                     "required_rank"},
                 "offline");
      if (o.contains("lengths")) c.offline_lengths = o["lengths"].get<std::vector<Index>>();
      if (o.contains("amplitude")) c.excitation.amplitude = o["amplitude"].get<double>();
      if (o.contains("offset")) c.excitation.offset = o["offset"].get<double>();
      if (o.contains("hold")) c.excitation.hold = o["hold"].get<Index>();
      if (o.contains("lambda")) c.offline_lambda = o["lambda"].get<double>();
      if (o.contains("noise")) c.offline_noise = o["noise"].get<bool>();
      if (o.contains("seed_offset")) c.offline_seed_offset = o["seed_offset"].get<std::uint64_t>();
      if (o.contains("retries")) c.offline_retries = o["retries"].get<int>();
      if (o.contains("required_rank")) c.offline_required_rank = o["required_rank"].get<Index>();
    }
    if (j.contains("warmup")) {
      const json& w = j["warmup"];
      check_keys(w, {"kind", "value"}, "warmup");
      const auto kindw = w.value("kind", std::string("zero"));
      if (kindw == "zero") {
        c.warmup = WarmupPolicy{WarmupKind::zero, Vector()};
      } else if (kindw == "constant") {
        c.warmup = WarmupPolicy{WarmupKind::constant, to_vector(w.at("value"), -1, "warmup.value")};
        if (w.at("value").is_number()) c.warmup.value = Vector::Constant(1, w["value"].get<double>());
      } else {
        throw ConfigError("warmup.kind must be \"zero\" or \"constant\"");
      }
    }
    if (j.contains("reference")) {
      const json& r = j["reference"];
      check_keys(r, {"output", "input"}, "reference");
      if (r.contains("output"))
        c.output_reference = to_signal(r["output"], c.deepc.output_dim, "reference.output");
      if (r.contains("input") && !r["input"].is_null())
        c.input_reference = to_signal(r["input"], c.deepc.input_dim, "reference.input");
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace rodeepc
