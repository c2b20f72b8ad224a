#include "ctlmpc/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace ctlmpc {

using nlohmann::json;

ControllerChoice parse_controller_choice(const std::string& s) {
  if (s == "ct") return ControllerChoice::Ct;
  if (s == "dt") return ControllerChoice::Dt;
  if (s == "both") return ControllerChoice::Both;
  throw std::invalid_argument("controller must be ct, dt or both, got '" + s + "'");
}

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "det" || s == "deterministic") return NoiseMode::Deterministic;
  if (s == "stoch" || s == "stochastic") return NoiseMode::Stochastic;
  throw std::invalid_argument("mode must be det or stoch, got '" + s + "'");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("not a nonnegative integer: '" + s + "'");
  }
  return std::stoull(s);
}

}  // namespace

std::vector<double> parse_ts_list(const std::string& s) {
  std::vector<double> out;
  for (const std::string& part : split(s, ',')) {
    if (part.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || !(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("bad controller sampling time '" + part + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("controller sampling time list is empty");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = parse_u64(s.substr(0, dots));
    const std::uint64_t hi = parse_u64(s.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("seed range '" + s + "' is empty");
    for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  for (const std::string& part : split(s, ',')) {
    if (!part.empty()) out.push_back(parse_u64(part));
  }
  if (out.empty()) throw std::invalid_argument("seed list is empty");
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void indexed(std::ostringstream& os, const char* base, Index n) {
  for (Index i = 1; i <= n; ++i) os << ',' << base << '_' << i;
}

void values(std::ostream& os, const Vector& v, Index n) {
  for (Index i = 0; i < n; ++i) os << ',' << (i < v.size() ? num(v(i)) : std::string("0"));
}

json metrics_json(const SimMetrics& m) {
  auto arr = [](const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  return {{"rms_error", arr(m.rms_error)},
          {"rms_total", m.rms_total},
          {"total_cost", m.total_cost},
          {"max_abs_error", arr(m.max_abs_error)},
          {"max_overshoot", arr(m.max_overshoot)},
          {"max_abs_du", arr(m.max_abs_du)},
          {"violation_fraction", m.violation_fraction},
          {"controller_steps", m.controller_steps},
          {"max_kkt_residual", m.max_kkt_residual}};
}

}  // namespace

std::string results_header(const Scenario& sc) {
  const auto nz = static_cast<Index>(sc.plant_G.rows());
  const auto nu = static_cast<Index>(sc.plant_G.cols());
  const auto nd = static_cast<Index>(sc.plant_Gd.cols());
  std::ostringstream os;
  os << "controller,t";
  indexed(os, "zbar", nz);
  indexed(os, "y", nz);
  indexed(os, "z", nz);
  indexed(os, "u", nu);
  indexed(os, "d", nd);
  indexed(os, "xi", nz);
  indexed(os, "eta", nz);
  os << ",stage_cost,qp_iters,controller_tick";
  return os.str();
}

void write_results_csv(std::ostream& os, const Scenario& sc, const std::vector<SimResult>& runs) {
  const auto nz = static_cast<Index>(sc.plant_G.rows());
  const auto nu = static_cast<Index>(sc.plant_G.cols());
  const auto nd = static_cast<Index>(sc.plant_Gd.cols());
  os << results_header(sc) << '\n';
  for (const SimResult& r : runs) {
    const char* name = to_string(r.kind);
    for (const SimSample& s : r.samples) {
      os << name << ',' << num(s.t);
      values(os, s.zbar, nz);
      values(os, s.y, nz);
      values(os, s.z, nz);
      values(os, s.u, nu);
      values(os, s.d, nd);
      values(os, s.xi, nz);
      values(os, s.eta, nz);
      os << ',' << num(s.stage_cost) << ',' << s.qp_iterations << ',' << (s.controller_tick ? 1 : 0) << '\n';
    }
  }
}

std::string summary_json(const Scenario& sc, const std::vector<SimResult>& runs,
                         const std::optional<std::string>& error) {
  json j;
  j["scenario"] = sc.name;
  j["Ts"] = sc.Ts;
  j["Ts_controller"] = sc.Ts_controller;
  j["T_sim"] = sc.T_sim;
  j["N"] = sc.N;
  j["seed"] = sc.seed;
  j["mode"] = to_string(sc.mode);
  j["controllers"] = json::object();
  for (const SimResult& r : runs) j["controllers"][to_string(r.kind)] = metrics_json(r.metrics);
  const SimResult* ct = nullptr;
  const SimResult* dt = nullptr;
  for (const SimResult& r : runs) (r.kind == ControllerKind::Continuous ? ct : dt) = &r;
  if (ct && dt) {
    j["comparison"] = {{"rms_delta", dt->metrics.rms_total - ct->metrics.rms_total},
                       {"cost_delta", dt->metrics.total_cost - ct->metrics.total_cost},
                       {"overshoot_delta", (dt->metrics.max_overshoot - ct->metrics.max_overshoot).maxCoeff()}};
  }
  j["status"] = error ? "qp_failure" : "ok";
  if (error) j["error"] = *error;
  return j.dump(2) + "\n";
}

namespace {

struct Series {
  std::string label;
  std::string color;
  bool dashed = false;
  std::vector<double> t;
  std::vector<double> v;
};

std::string chart(const std::string& title, const std::vector<std::string>& panel_titles,
                  const std::vector<std::vector<Series>>& panels, double t_end) {
  const double W = 900, PH = 220, ML = 70, MR = 20, MT = 30, MB = 30;
  const double H = MT + static_cast<double>(panels.size()) * (PH + MB) + 10;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double top = MT + static_cast<double>(p) * (PH + MB);
    double lo = kInf, hi = -kInf;
    for (const auto& s : panels[p]) {
      for (double v : s.v) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double pw = W - ML - MR;
    auto X = [&](double t) { return ML + pw * t / t_end; };
    auto Y = [&](double v) { return top + PH * (hi - v) / (hi - lo); };
    os << "<rect x=\"" << ML << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << PH
       << "\" fill=\"none\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << ML + 4 << "\" y=\"" << top + 14 << "\">" << panel_titles[p] << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = lo + (hi - lo) * k / 4.0;
      os << "<text x=\"" << ML - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">" << num(std::round(v * 1000) / 1000)
         << "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
      const double t = t_end * k / 5.0;
      os << "<text x=\"" << X(t) << "\" y=\"" << top + PH + 14 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    }
    double ly = top + 14;
    for (const auto& s : panels[p]) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\""
         << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
      const std::size_t stride = std::max<std::size_t>(1, s.t.size() / 2000);
      for (std::size_t i = 0; i < s.t.size(); i += stride) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(s.t[i]), Y(s.v[i]));
        os << buf;
      }
      os << "\"/>\n";
      os << "<text x=\"" << W - MR - 4 << "\" y=\"" << ly << "\" text-anchor=\"end\" fill=\"" << s.color << "\">"
         << s.label << "</text>\n";
      ly += 14;
    }
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 4 << "\" text-anchor=\"middle\">t [s]</text>\n";
  os << "</svg>\n";
  return os.str();
}

const char* color(ControllerKind k) { return k == ControllerKind::Continuous ? "black" : "#1f5fd6"; }

Series series(const SimResult& r, const std::string& label, const char* col,
              const std::function<double(const SimSample&)>& f) {
  Series s{label, col, false, {}, {}};
  for (const SimSample& x : r.samples) {
    s.t.push_back(x.t);
    s.v.push_back(f(x));
  }
  return s;
}

}  // namespace

std::string outputs_svg(const Scenario& sc, const std::vector<SimResult>& runs) {
  std::vector<std::vector<Series>> panels;
  std::vector<std::string> titles;
  for (Index i = 0; i < static_cast<Index>(sc.plant_G.rows()); ++i) {
    std::vector<Series> p;
    for (const SimResult& r : runs) {
      p.push_back(series(r, std::string(to_string(r.kind)) + " y", color(r.kind), [i](const SimSample& s) { return s.y(i); }));
    }
    if (!runs.empty()) {
      Series ref = series(runs.front(), "reference", "#d62728", [i](const SimSample& s) { return s.zbar(i); });
      ref.dashed = true;
      p.push_back(std::move(ref));
    }
    panels.push_back(std::move(p));
    titles.push_back("output " + std::to_string(i + 1));
  }
  return chart(sc.name + ": outputs", titles, panels, sc.T_sim);
}

std::string inputs_svg(const Scenario& sc, const std::vector<SimResult>& runs) {
  std::vector<std::vector<Series>> panels;
  std::vector<std::string> titles;
  for (Index j = 0; j < static_cast<Index>(sc.plant_G.cols()); ++j) {
    std::vector<Series> p;
    for (const SimResult& r : runs) {
      p.push_back(series(r, std::string(to_string(r.kind)) + " u", color(r.kind), [j](const SimSample& s) { return s.u(j); }));
    }
    panels.push_back(std::move(p));
    titles.push_back("input " + std::to_string(j + 1));
  }
  return chart(sc.name + ": inputs", titles, panels, sc.T_sim);
}

Scenario apply_overrides(Scenario sc, const RunOptions& o) {
  if (o.ts_controller) sc.Ts_controller = *o.ts_controller;
  if (o.seed) sc.seed = *o.seed;
  if (o.mode) sc.mode = *o.mode;
  sc.validate();
  return sc;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
}

std::vector<ControllerKind> kinds(ControllerChoice c) {
  switch (c) {
    case ControllerChoice::Ct: return {ControllerKind::Continuous};
    case ControllerChoice::Dt: return {ControllerKind::Discrete};
    case ControllerChoice::Both: break;
  }
  return {ControllerKind::Continuous, ControllerKind::Discrete};
}

}  // namespace

RunReport run(const Scenario& scenario, const RunOptions& options) {
  RunReport rep;
  rep.scenario = apply_overrides(scenario, options);
  const Scenario& sc = rep.scenario;
  const NoiseSequence noise = generate_noise(sc);
  for (ControllerKind k : kinds(options.controller)) {
    try {
      rep.runs.push_back(run_closed_loop(sc, design_controller(sc, k), noise));
    } catch (const SimulationError& e) {
      rep.error = std::string(to_string(k)) + ": " + e.what();
      rep.exit_code = 2;
      break;
    }
  }
  std::filesystem::create_directories(options.out);
  std::ostringstream csv;
  write_results_csv(csv, sc, rep.runs);
  write_file(options.out / "results.csv", csv.str());
  write_file(options.out / "summary.json", summary_json(sc, rep.runs, rep.error));
  if (options.plot && !rep.runs.empty()) {
    write_file(options.out / "outputs.svg", outputs_svg(sc, rep.runs));
    write_file(options.out / "inputs.svg", inputs_svg(sc, rep.runs));
  }
  return rep;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "ts_controller,seed,controller,rms_total,total_cost,max_overshoot,max_abs_error,violation_fraction,failed\n";
  for (const SweepRow& r : rows) {
    const SimMetrics& m = r.metrics;
    const double overshoot = m.max_overshoot.size() ? m.max_overshoot.maxCoeff() : 0.0;
    const double err = m.max_abs_error.size() ? m.max_abs_error.maxCoeff() : 0.0;
    os << num(r.ts_controller) << ',' << r.seed << ',' << to_string(r.kind) << ',' << num(m.rms_total) << ','
       << num(m.total_cost) << ',' << num(overshoot) << ',' << num(err) << ',' << num(m.violation_fraction) << ','
       << (r.failed ? 1 : 0) << '\n';
  }
}

std::vector<SweepRow> sweep(const Scenario& scenario, const std::vector<double>& ts_list,
                            const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out,
                            std::optional<NoiseMode> mode) {
  if (ts_list.empty()) throw std::invalid_argument("sweep: controller sampling time list is empty");
  if (seeds.empty()) throw std::invalid_argument("sweep: seed list is empty");
  std::vector<SweepRow> rows;
  for (double ts : ts_list) {
    for (std::uint64_t seed : seeds) {
      RunOptions o;
      o.ts_controller = ts;
      o.seed = seed;
      o.mode = mode;
      const Scenario sc = apply_overrides(scenario, o);
      const NoiseSequence noise = generate_noise(sc);
      for (ControllerKind k : kinds(ControllerChoice::Both)) {
        SweepRow row;
        row.ts_controller = ts;
        row.seed = seed;
        row.kind = k;
        try {
          row.metrics = run_closed_loop(sc, design_controller(sc, k), noise).metrics;
        } catch (const SimulationError&) {
          row.failed = true;
        }
        rows.push_back(std::move(row));
      }
    }
  }
  std::filesystem::create_directories(out);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_file(out / "sweep.csv", csv.str());
  return rows;
}

}  // namespace ctlmpc
