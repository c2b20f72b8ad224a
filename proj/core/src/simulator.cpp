#include "ctlmpc/simulator.hpp"

#include "ctlmpc/realization.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ctlmpc {

Plant build_plant(const TransferMatrix& G, const TransferMatrix& Gd, double Ts, const Matrix& R_ww,
                  const Matrix& R_vv) {
  if (!(Ts > 0.0)) throw std::invalid_argument("build_plant: Ts must be positive");
  if (Gd.cols() > 0 && Gd.rows() != G.rows()) throw std::invalid_argument("build_plant: G and Gd row counts differ");
  for (const TransferMatrix* m : {&G, &Gd}) {
    const ValidationReport report = validate(*m);
    if (!report.ok()) throw std::invalid_argument("build_plant: invalid model\n" + report.to_string());
  }
  const auto nu = static_cast<Index>(G.cols());
  const auto nd = static_cast<Index>(Gd.cols());
  const auto nz = static_cast<Index>(G.rows());
  if (R_ww.rows() != nd || R_ww.cols() != nd) throw std::invalid_argument("build_plant: R_ww must be n_d x n_d");
  if (R_vv.rows() != nz || R_vv.cols() != nz) throw std::invalid_argument("build_plant: R_vv must be n_z x n_z");
  require_psd(R_ww, "R_ww");
  require_psd(R_vv, "R_vv");

  std::vector<DelayedSisoSS> channels = realize_channels(G);
  for (DelayedSisoSS& c : realize_channels(Gd)) {
    c.input += static_cast<std::size_t>(nu);
    channels.push_back(std::move(c));
  }
  const SampledModel model = SampledModel::from_channels(channels, nz, nu + nd, Ts);
  const DiscreteLti& s = model.system();

  Plant p;
  p.A = s.A;
  p.B = s.B.leftCols(nu);
  p.E = s.B.rightCols(nd);
  p.G = p.E;
  p.C = s.C;
  p.D = s.D.leftCols(nu);
  p.F = s.D.rightCols(nd);
  p.R_ww = R_ww;
  p.R_vv = R_vv;
  p.Ts = Ts;
  p.x = Vector::Zero(p.A.rows());
  return p;
}

Schedule Schedule::constant(const Vector& v) { return Schedule{{0.0}, {v}}; }

Vector Schedule::at(double t) const {
  if (values.empty()) return {};
  std::size_t i = 0;
  while (i + 1 < times.size() && times[i + 1] < t) ++i;
  return values[i];
}

Vector Schedule::after(double t) const {
  if (values.empty()) return {};
  std::size_t i = 0;
  while (i + 1 < times.size() && times[i + 1] <= t) ++i;
  return values[i];
}

Schedule Schedule::snapped(double Ts) const {
  Schedule s = *this;
  for (double& t : s.times) t = std::round(t / Ts) * Ts;
  return s;
}

bool Schedule::operator==(const Schedule& o) const {
  if (times != o.times || values.size() != o.values.size()) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != o.values[i].size() || values[i] != o.values[i]) return false;
  }
  return true;
}

const char* to_string(NoiseMode mode) { return mode == NoiseMode::Deterministic ? "det" : "stoch"; }

std::size_t Scenario::ratio() const { return static_cast<std::size_t>(std::llround(Ts_controller / Ts)); }

std::size_t Scenario::plant_steps() const { return static_cast<std::size_t>(std::llround(T_sim / Ts)); }

void Scenario::validate() const {
  std::ostringstream issues;
  const std::size_t nz = plant_G.rows();
  const std::size_t nu = plant_G.cols();
  if (!(Ts > 0.0)) issues << "  Ts must be positive\n";
  if (!(Ts_controller > 0.0)) issues << "  Ts_controller must be positive\n";
  if (Ts > 0.0 && Ts_controller > 0.0) {
    const double r = Ts_controller / Ts;
    if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r) || std::round(r) < 1.0) {
      issues << "  Ts_controller (" << Ts_controller << ") is not an integer multiple of Ts (" << Ts << ")\n";
    }
  }
  if (!(T_sim > 0.0)) issues << "  T_sim must be positive\n";
  if (N == 0) issues << "  horizon N must be at least 1\n";
  if (model_G.rows() != nz || model_G.cols() != nu) issues << "  model_G and plant_G dimensions differ\n";
  if (model_H.rows() != nz) issues << "  model_H must have one row per output\n";
  if (plant_Gd.rows() != nz && plant_Gd.cols() > 0) issues << "  plant_Gd must have one row per output\n";
  for (const auto& [name, m] : {std::pair<const char*, const TransferMatrix*>{"plant_G", &plant_G},
                                {"plant_Gd", &plant_Gd},
                                {"model_G", &model_G},
                                {"model_H", &model_H}}) {
    const ValidationReport r = ctlmpc::validate(*m);
    if (!r.ok()) issues << "  " << name << ":\n" << r.to_string();
  }
  if (model_H.role() != ChannelRole::Stochastic) issues << "  model_H must have the stochastic role\n";
  auto check_schedule = [&](const Schedule& s, std::size_t dim, const char* name) {
    if (s.values.empty() || s.times.size() != s.values.size()) {
      issues << "  " << name << ": needs one value per switch time\n";
      return;
    }
    if (s.times.front() > 0.0) issues << "  " << name << ": must start at t = 0\n";
    for (std::size_t i = 1; i < s.times.size(); ++i) {
      if (!(s.times[i] > s.times[i - 1])) issues << "  " << name << ": switch times must increase\n";
    }
    for (const Vector& v : s.values) {
      if (static_cast<std::size_t>(v.size()) != dim) {
        issues << "  " << name << ": value of size " << v.size() << ", expected " << dim << "\n";
        break;
      }
    }
  };
  check_schedule(reference, nz, "reference");
  check_schedule(input_reference, nu, "input_reference");
  check_schedule(disturbance, plant_Gd.cols(), "disturbance");
  if (R_ww.rows() != static_cast<Index>(plant_Gd.cols()) || R_ww.cols() != R_ww.rows()) {
    issues << "  R_ww must be n_d x n_d\n";
  }
  if (R_vv.rows() != static_cast<Index>(nz) || R_vv.cols() != R_vv.rows()) issues << "  R_vv must be n_z x n_z\n";
  try {
    limits.validate();
  } catch (const std::invalid_argument& e) {
    issues << "  " << e.what() << "\n";
  }
  if (limits.u_min.size() != static_cast<Index>(nu) || limits.z_min.size() != static_cast<Index>(nz)) {
    issues << "  limits have wrong dimensions\n";
  }
  const std::string s = issues.str();
  if (!s.empty()) throw std::invalid_argument("invalid scenario '" + name + "':\n" + s);
}

bool Scenario::operator==(const Scenario& o) const {
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return name == o.name && plant_G == o.plant_G && plant_Gd == o.plant_Gd && model_G == o.model_G &&
         model_H == o.model_H && weights == o.weights && dt_weights == o.dt_weights && limits == o.limits &&
         N == o.N && Ts == o.Ts && Ts_controller == o.Ts_controller && T_sim == o.T_sim &&
         reference == o.reference && input_reference == o.input_reference && disturbance == o.disturbance &&
         same(R_ww, o.R_ww) && same(R_vv, o.R_vv) && seed == o.seed && mode == o.mode;
}

ControllerDesign design_controller(const Scenario& sc, ControllerKind kind) {
  const NsRealization ns = realize_ns(sc.model_G, sc.model_H);
  if (kind == ControllerKind::Continuous) {
    return design_ct_lmpc(ns, sc.weights, sc.limits, sc.N, sc.Ts_controller, sc.R_vv);
  }
  return build_dt_baseline(ns, sc.dt_weights, sc.limits, sc.N, sc.Ts_controller, sc.R_vv);
}

namespace {

// L with L L' = cov, tolerating semidefinite input.
Matrix noise_factor(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(cov));
  const Vector lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

}  // namespace

NoiseSequence generate_noise(const Scenario& sc) {
  const std::size_t steps = sc.plant_steps();
  const Index nd = sc.R_ww.rows();
  const Index nz = sc.R_vv.rows();
  NoiseSequence n;
  n.w.assign(steps, Vector::Zero(nd));
  n.v.assign(steps, Vector::Zero(nz));
  if (sc.mode == NoiseMode::Deterministic) return n;
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix Lw = noise_factor(sc.R_ww);
  const Matrix Lv = noise_factor(sc.R_vv);
  Vector e;
  for (std::size_t k = 0; k < steps; ++k) {
    e.resize(nd);
    for (Index i = 0; i < nd; ++i) e(i) = normal(rng);
    n.w[k] = Lw * e;
    e.resize(nz);
    for (Index i = 0; i < nz; ++i) e(i) = normal(rng);
    n.v[k] = Lv * e;
  }
  return n;
}

SimMetrics compute_metrics(const Scenario& sc, const std::vector<SimSample>& samples) {
  SimMetrics m;
  if (samples.empty()) return m;
  const Index nz = samples.front().z.size();
  const Index nu = samples.front().u.size();
  m.rms_error = Vector::Zero(nz);
  m.max_abs_error = Vector::Zero(nz);
  m.max_overshoot = Vector::Zero(nz);
  m.max_abs_du = Vector::Zero(nu);
  Vector direction = Vector::Zero(nz);
  Vector last_ref = Vector::Constant(nz, std::nan(""));
  Vector u_prev = Vector::Zero(nu);
  std::size_t violations = 0;
  for (const SimSample& s : samples) {
    const Vector e = s.z - s.zbar;
    for (Index i = 0; i < nz; ++i) {
      if (!(s.zbar(i) == last_ref(i))) {
        const double dir = s.zbar(i) - s.z(i);
        direction(i) = dir > 0.0 ? 1.0 : (dir < 0.0 ? -1.0 : 0.0);
        last_ref(i) = s.zbar(i);
      }
      m.max_overshoot(i) = std::max(m.max_overshoot(i), direction(i) * e(i));
    }
    m.rms_error += e.cwiseAbs2();
    m.max_abs_error = m.max_abs_error.cwiseMax(e.cwiseAbs());
    m.max_abs_du = m.max_abs_du.cwiseMax((s.u - u_prev).cwiseAbs());
    u_prev = s.u;
    if ((s.z.array() < sc.limits.z_min.array()).any() || (s.z.array() > sc.limits.z_max.array()).any()) {
      ++violations;
    }
    m.total_cost += s.stage_cost;
    if (s.controller_tick) ++m.controller_steps;
  }
  const auto n = static_cast<double>(samples.size());
  m.rms_total = std::sqrt(m.rms_error.sum() / (n * static_cast<double>(nz)));
  m.rms_error = (m.rms_error / n).cwiseSqrt();
  m.violation_fraction = static_cast<double>(violations) / n;
  return m;
}

namespace {

double stage_cost(const Scenario& sc, const Vector& z, const Vector& zbar, const Vector& u, const Vector& ubar) {
  const ContinuousWeights& w = sc.weights;
  const Vector e = z - zbar;
  const Vector eu = u - ubar;
  double l = 0.5 * e.dot(w.Q_cz * e) + 0.5 * eu.dot(w.Q_cu * eu) + w.q_ceco.dot(u);
  const Vector xi = (sc.limits.z_min - z).cwiseMax(0.0);
  const Vector eta = (z - sc.limits.z_max).cwiseMax(0.0);
  l += 0.5 * xi.dot(w.Q_cxi * xi) + w.q_cxi.dot(xi) + 0.5 * eta.dot(w.Q_ceta * eta) + w.q_ceta.dot(eta);
  return l * sc.Ts;
}

}  // namespace

SimResult run_closed_loop(const Scenario& sc, const ControllerDesign& design, const NoiseSequence& noise) {
  const std::size_t steps = sc.plant_steps();
  const std::size_t r = sc.ratio();
  if (noise.w.size() < steps || noise.v.size() < steps) {
    throw std::invalid_argument("run_closed_loop: noise sequence shorter than the simulation");
  }
  if (std::abs(design.Ts - sc.Ts_controller) > 1e-12 * sc.Ts_controller) {
    throw std::invalid_argument("run_closed_loop: controller designed for a different sampling time");
  }
  Plant plant = build_plant(sc.plant_G, sc.plant_Gd, sc.Ts, sc.R_ww, sc.R_vv);
  const Schedule ref = sc.reference.snapped(sc.Ts);
  const Schedule uref = sc.input_reference.snapped(sc.Ts);
  const Schedule dist = sc.disturbance.snapped(sc.Ts);

  const Index nu = plant.n_u();
  const Index nz = plant.n_z();
  ControllerState state = initial_state(design, Vector::Zero(nu));
  Vector u = Vector::Zero(nu);
  Vector xi = Vector::Zero(design.soft ? nz : 0);
  Vector eta = xi;

  SimResult result;
  result.kind = design.kind;
  result.samples.reserve(steps);
  StepInputs in;
  in.z_ref.resize(design.N + 1);
  in.u_ref.resize(design.N);
  std::size_t tick = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * sc.Ts;
    const Vector d = dist.after(t);
    SimSample s;
    s.t = t;
    s.d = d;
    s.zbar = ref.after(t);
    const Vector dn = d + noise.w[k];
    if (k % r == 0) {
      in.y = plant.output(u, dn) + noise.v[k];
      // interval values for the integral cost, sample values for the discrete baseline
      for (std::size_t j = 0; j <= design.N; ++j) {
        const double tj = t + static_cast<double>(j) * design.Ts;
        in.z_ref[j] = design.kind == ControllerKind::Continuous ? ref.after(tj) : ref.at(tj);
      }
      for (std::size_t j = 0; j < design.N; ++j) in.u_ref[j] = uref.after(t + static_cast<double>(j) * design.Ts);
      StepResult res;
      try {
        res = step(design, state, in);
      } catch (const QpFailure& e) {
        throw SimulationError("controller tick " + std::to_string(tick) + " (t = " + std::to_string(t) +
                                  " s): " + e.what(),
                              tick, e.solution());
      }
      const Vector du = res.u - u;
      s.stage_cost += 0.5 * du.dot(sc.weights.Q_cdu * du) / sc.Ts_controller;
      u = res.u;
      if (design.soft) {
        xi = res.xi;
        eta = res.eta;
      }
      s.qp_iterations = res.qp.iterations;
      s.controller_tick = true;
      const QpResiduals& q = res.qp.residuals;
      result.metrics.max_kkt_residual = std::max(
          {result.metrics.max_kkt_residual, q.stationarity, q.primal, q.complementarity});
      ++tick;
      s.y = in.y;
    }
    s.z = plant.output(u, dn);
    if (!s.controller_tick) s.y = s.z + noise.v[k];
    s.u = u;
    s.xi = xi;
    s.eta = eta;
    s.stage_cost += stage_cost(sc, s.z, s.zbar, u, uref.after(t));
    result.samples.push_back(std::move(s));
    plant.advance(u, d, noise.w[k]);
  }
  const double kkt = result.metrics.max_kkt_residual;
  result.metrics = compute_metrics(sc, result.samples);
  result.metrics.max_kkt_residual = kkt;
  return result;
}

SimResult run_closed_loop(const Scenario& sc, ControllerKind kind) {
  sc.validate();
  return run_closed_loop(sc, design_controller(sc, kind), generate_noise(sc));
}

Comparison compare_controllers(const Scenario& sc, const ControllerDesign& ct, const ControllerDesign& dt) {
  const NoiseSequence noise = generate_noise(sc);
  Comparison c;
  c.ct = run_closed_loop(sc, ct, noise);
  c.dt = run_closed_loop(sc, dt, noise);
  c.rms_delta = c.dt.metrics.rms_total - c.ct.metrics.rms_total;
  c.cost_delta = c.dt.metrics.total_cost - c.ct.metrics.total_cost;
  c.overshoot_delta = (c.dt.metrics.max_overshoot - c.ct.metrics.max_overshoot).maxCoeff();
  return c;
}

Comparison compare_controllers(const Scenario& sc) {
  sc.validate();
  return compare_controllers(sc, design_controller(sc, ControllerKind::Continuous),
                             design_controller(sc, ControllerKind::Discrete));
}

}  // namespace ctlmpc
