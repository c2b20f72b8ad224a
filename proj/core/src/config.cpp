#include "ctlmpc/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace ctlmpc {

using nlohmann::json;

namespace {

std::string describe(const std::vector<ConfigError::Issue>& issues) {
  std::ostringstream os;
  os << issues.size() << " problem" << (issues.size() == 1 ? "" : "s") << ":";
  for (const auto& i : issues) os << "\n  " << (i.field.empty() ? "<root>" : i.field) << ": " << i.message;
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::string source, std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      source_(std::move(source)),
      line_(line),
      column_(column) {}

ConfigError::ConfigError(std::string source, std::vector<Issue> issues)
    : std::runtime_error(source + ": invalid config, " + describe(issues)),
      source_(std::move(source)),
      issues_(std::move(issues)) {}

namespace {

class Reader {
 public:
  std::vector<ConfigError::Issue> issues;

  void fail(const std::string& field, const std::string& message) { issues.push_back({field, message}); }

  bool number(const json& j, const std::string& field, double& out) {
    if (!j.is_number()) {
      fail(field, "expected a number");
      return false;
    }
    out = j.get<double>();
    if (!std::isfinite(out)) {
      fail(field, "must be finite");
      return false;
    }
    return true;
  }

  double number_or(const json& parent, const char* key, const std::string& path, double fallback) {
    if (!parent.contains(key)) return fallback;
    double v = fallback;
    number(parent.at(key), path + key, v);
    return v;
  }

  // Number, null or "inf"/"-inf" strings; null means `absent`.
  bool bound(const json& j, const std::string& field, double absent, double& out) {
    if (j.is_null()) {
      out = absent;
      return true;
    }
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "inf" || s == "+inf") {
        out = kInf;
        return true;
      }
      if (s == "-inf") {
        out = -kInf;
        return true;
      }
    }
    if (!j.is_number()) {
      fail(field, "expected a number, null or \"inf\"");
      return false;
    }
    out = j.get<double>();
    return true;
  }

  Vector vector(const json& j, const std::string& field, Index n) {
    Vector v = Vector::Zero(n);
    if (j.is_number()) {
      if (n != 1) fail(field, "expected an array of " + std::to_string(n) + " numbers");
      else number(j, field, v(0));
      return v;
    }
    if (!j.is_array() || static_cast<Index>(j.size()) != n) {
      fail(field, "expected an array of " + std::to_string(n) + " numbers");
      return v;
    }
    for (Index i = 0; i < n; ++i) number(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]", v(i));
    return v;
  }

  Vector bounds(const json& parent, const char* key, const std::string& path, Index n, double absent) {
    Vector v = Vector::Constant(n, absent);
    if (!parent.contains(key)) return v;
    const json& j = parent.at(key);
    const std::string field = path + key;
    if (j.is_null()) return v;
    if (!j.is_array()) {
      if (n == 1) bound(j, field, absent, v(0));
      else fail(field, "expected an array of " + std::to_string(n) + " bounds");
      return v;
    }
    if (static_cast<Index>(j.size()) != n) {
      fail(field, "expected " + std::to_string(n) + " entries, got " + std::to_string(j.size()));
      return v;
    }
    for (Index i = 0; i < n; ++i) {
      bound(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]", absent, v(i));
    }
    return v;
  }

  // Scalar -> multiple of identity, flat array -> diagonal, nested -> full.
  Matrix matrix(const json& j, const std::string& field, Index n) {
    Matrix m = Matrix::Zero(n, n);
    if (j.is_number()) {
      double s = 0.0;
      if (number(j, field, s)) m = s * Matrix::Identity(n, n);
      return m;
    }
    if (!j.is_array() || static_cast<Index>(j.size()) != n) {
      fail(field, "expected a scalar, a diagonal of " + std::to_string(n) + " or an " + std::to_string(n) + "x" +
                      std::to_string(n) + " matrix");
      return m;
    }
    if (n > 0 && j[0].is_array()) {
      for (Index r = 0; r < n; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        const std::string rf = field + "[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<Index>(row.size()) != n) {
          fail(rf, "expected a row of " + std::to_string(n) + " numbers");
          continue;
        }
        for (Index c = 0; c < n; ++c) number(row[static_cast<std::size_t>(c)], rf + "[" + std::to_string(c) + "]", m(r, c));
      }
      return m;
    }
    m.diagonal() = vector(j, field, n);
    return m;
  }

  Polynomial polynomial(const json& j, const std::string& field) {
    Polynomial p;
    if (!j.is_array() || j.empty()) {
      fail(field, "expected a non-empty array of coefficients");
      return {1.0};
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      double c = 0.0;
      number(j[i], field + "[" + std::to_string(i) + "]", c);
      p.push_back(c);
    }
    return p;
  }

  std::vector<Polynomial> factors(const json& parent, const char* key, const std::string& path) {
    std::vector<Polynomial> out;
    if (!parent.contains(key)) return out;
    const json& j = parent.at(key);
    if (!j.is_array()) {
      fail(path + key, "expected an array of factors");
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(polynomial(j[i], path + key + "[" + std::to_string(i) + "]"));
    return out;
  }

  RationalTransfer transfer(const json& j, const std::string& field) {
    if (j.is_null()) return RationalTransfer::zero();
    if (j.is_number()) {
      double g = 0.0;
      number(j, field, g);
      return g == 0.0 ? RationalTransfer::zero() : RationalTransfer{{g}, {1.0}, 0.0};
    }
    if (!j.is_object()) {
      fail(field, "expected a transfer function object, a number or null");
      return RationalTransfer::zero();
    }
    const std::string p = field + ".";
    const double delay = number_or(j, "delay", p, 0.0);
    const bool coefficient_form = j.contains("num") || j.contains("den");
    const bool factor_form = j.contains("gain") || j.contains("num_factors") || j.contains("den_factors");
    if (coefficient_form && factor_form) {
      fail(field, "use either num/den or gain/num_factors/den_factors, not both");
      return RationalTransfer::zero();
    }
    if (coefficient_form) {
      RationalTransfer tf;
      tf.num = j.contains("num") ? polynomial(j.at("num"), p + "num") : Polynomial{1.0};
      tf.den = j.contains("den") ? polynomial(j.at("den"), p + "den") : Polynomial{1.0};
      tf.delay = delay;
      return tf;
    }
    const double gain = number_or(j, "gain", p, 1.0);
    return RationalTransfer::from_factors(gain, factors(j, "num_factors", p), factors(j, "den_factors", p), delay);
  }

  TransferMatrix transfer_matrix(const json& j, const std::string& field, ChannelRole role) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
      fail(field, "expected a non-empty array of rows");
      return TransferMatrix(0, 0, role);
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    TransferMatrix m(rows, cols, role);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string rf = field + "[" + std::to_string(r) + "]";
      if (!j[r].is_array() || j[r].size() != cols) {
        fail(rf, "every row needs " + std::to_string(cols) + " entries");
        continue;
      }
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = transfer(j[r][c], rf + "[" + std::to_string(c) + "]");
    }
    return m;
  }

  Schedule schedule(const json& parent, const char* key, Index n, double unit) {
    const std::string field = key;
    if (!parent.contains(key)) return Schedule::constant(Vector::Zero(n));
    const json& j = parent.at(key);
    if (j.is_number() || (j.is_array() && (j.empty() || !j[0].is_object()))) {
      return Schedule::constant(vector(j, field, n));
    }
    if (!j.is_array()) {
      fail(field, "expected a constant or an array of {\"t\", \"value\"} entries");
      return Schedule::constant(Vector::Zero(n));
    }
    Schedule s;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string ef = field + "[" + std::to_string(i) + "]";
      const json& e = j[i];
      if (!e.is_object() || !e.contains("t") || !e.contains("value")) {
        fail(ef, "expected {\"t\": ..., \"value\": ...}");
        continue;
      }
      double t = 0.0;
      number(e.at("t"), ef + ".t", t);
      s.times.push_back(t * unit);
      s.values.push_back(vector(e.at("value"), ef + ".value", n));
    }
    if (s.values.empty()) return Schedule::constant(Vector::Zero(n));
    return s;
  }

  ContinuousWeights weights(const json& j, const std::string& field, Index nz, Index nu) {
    ContinuousWeights w = ContinuousWeights::zeros(nz, nu);
    if (!j.is_object()) {
      fail(field, "expected an object");
      return w;
    }
    const std::string p = field + ".";
    auto mat = [&](const char* key, Matrix& out, Index n) {
      if (j.contains(key)) out = matrix(j.at(key), p + key, n);
    };
    auto vec = [&](const char* key, Vector& out, Index n) {
      if (j.contains(key)) out = vector(j.at(key), p + key, n);
    };
    mat("Q_cz", w.Q_cz, nz);
    mat("Q_cu", w.Q_cu, nu);
    mat("Q_cdu", w.Q_cdu, nu);
    vec("q_ceco", w.q_ceco, nu);
    mat("Q_cxi", w.Q_cxi, nz);
    mat("Q_ceta", w.Q_ceta, nz);
    vec("q_cxi", w.q_cxi, nz);
    vec("q_ceta", w.q_ceta, nz);
    for (const auto& [key, value] : j.items()) {
      static const char* known[] = {"Q_cz", "Q_cu", "Q_cdu", "q_ceco", "Q_cxi", "Q_ceta", "q_cxi", "q_ceta"};
      if (std::find(std::begin(known), std::end(known), key) == std::end(known)) fail(p + key, "unknown weight");
    }
    return w;
  }
};

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& prefix, Reader& rd) {
  if (!obj.is_object()) return;
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      rd.fail(prefix + key, "unknown key");
    }
  }
}

TransferMatrix time_scaled(const TransferMatrix& m, double unit, double gain) {
  TransferMatrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      RationalTransfer tf = m(i, j).time_scaled(unit);
      for (double& c : tf.num) c *= gain;
      out(i, j) = tf;
    }
  }
  return out;
}

const json& member(const json& root, const char* key, Reader& rd) {
  static const json null_value;
  if (!root.contains(key)) {
    rd.fail(key, "required");
    return null_value;
  }
  return root.at(key);
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(source, line, col, e.what());
  }
  Reader rd;
  if (!root.is_object()) throw ConfigError(source, {{"", "top level must be an object"}});

  Scenario sc;
  sc.name = root.value("name", std::string("scenario"));
  double unit = 1.0;
  const std::string time_unit = root.value("time_unit", std::string("seconds"));
  if (time_unit == "minutes") unit = 60.0;
  else if (time_unit != "seconds") rd.fail("time_unit", "must be \"seconds\" or \"minutes\"");

  const json& plant = member(root, "plant", rd);
  const json& model = member(root, "model", rd);
  if (!plant.is_object() || !model.is_object()) {
    if (!plant.is_null() && !plant.is_object()) rd.fail("plant", "expected an object");
    if (!model.is_null() && !model.is_object()) rd.fail("model", "expected an object");
    throw ConfigError(source, rd.issues);
  }
  reject_unknown(plant, {"G", "Gd", "Ts", "R_ww", "R_vv"}, "plant.", rd);
  reject_unknown(model, {"G", "H"}, "model.", rd);
  sc.plant_G = rd.transfer_matrix(member(plant, "G", rd), "plant.G", ChannelRole::Deterministic);
  sc.plant_Gd = plant.contains("Gd") ? rd.transfer_matrix(plant.at("Gd"), "plant.Gd", ChannelRole::Disturbance)
                                     : TransferMatrix(sc.plant_G.rows(), 0, ChannelRole::Disturbance);
  sc.model_G = rd.transfer_matrix(member(model, "G", rd), "model.G", ChannelRole::Deterministic);
  sc.model_H = rd.transfer_matrix(member(model, "H", rd), "model.H", ChannelRole::Stochastic);
  if (!rd.issues.empty()) throw ConfigError(source, rd.issues);

  const auto nz = static_cast<Index>(sc.plant_G.rows());
  const auto nu = static_cast<Index>(sc.plant_G.cols());
  const auto nd = static_cast<Index>(sc.plant_Gd.cols());

  if (unit != 1.0) {
    sc.plant_G = time_scaled(sc.plant_G, unit, 1.0);
    sc.plant_Gd = time_scaled(sc.plant_Gd, unit, 1.0);
    sc.model_G = time_scaled(sc.model_G, unit, 1.0);
    // white noise of unit intensity per `unit` has intensity `unit` per second
    sc.model_H = time_scaled(sc.model_H, unit, std::sqrt(unit));
  }

  sc.Ts = rd.number_or(plant, "Ts", "plant.", 1.0) * unit;
  sc.R_ww = plant.contains("R_ww") ? rd.matrix(plant.at("R_ww"), "plant.R_ww", nd) : Matrix::Zero(nd, nd);
  if (plant.contains("R_vv")) sc.R_vv = rd.matrix(plant.at("R_vv"), "plant.R_vv", nz);
  else rd.fail("plant.R_vv", "required");

  const json& ctrl = member(root, "controller", rd);
  if (ctrl.is_object()) {
    sc.Ts_controller = rd.number_or(ctrl, "Ts", "controller.", 0.0) * unit;
    double N = 0.0;
    if (ctrl.contains("N") && rd.number(ctrl.at("N"), "controller.N", N)) {
      if (N < 1.0 || N != std::floor(N)) rd.fail("controller.N", "must be a positive integer");
      else sc.N = static_cast<std::size_t>(N);
    } else if (!ctrl.contains("N")) {
      rd.fail("controller.N", "required");
    }
    const ContinuousWeights raw = ctrl.contains("weights") ? rd.weights(ctrl.at("weights"), "controller.weights", nz, nu)
                                                           : ContinuousWeights::zeros(nz, nu);
    sc.weights = raw.in_seconds(unit);
    sc.dt_weights = ctrl.contains("dt_weights")
                        ? rd.weights(ctrl.at("dt_weights"), "controller.dt_weights", nz, nu)
                        : raw;
    const json limits = ctrl.value("limits", json::object());
    const std::string lp = "controller.limits.";
    reject_unknown(ctrl, {"Ts", "N", "weights", "dt_weights", "limits"}, "controller.", rd);
    reject_unknown(limits, {"u_min", "u_max", "du_min", "du_max", "z_min", "z_max"}, lp, rd);
    sc.limits.u_min = rd.bounds(limits, "u_min", lp, nu, -kInf);
    sc.limits.u_max = rd.bounds(limits, "u_max", lp, nu, kInf);
    sc.limits.du_min = rd.bounds(limits, "du_min", lp, nu, -kInf);
    sc.limits.du_max = rd.bounds(limits, "du_max", lp, nu, kInf);
    sc.limits.z_min = rd.bounds(limits, "z_min", lp, nz, -kInf);
    sc.limits.z_max = rd.bounds(limits, "z_max", lp, nz, kInf);
    for (Index i = 0; i < nu; ++i) {
      if (sc.limits.u_min(i) > sc.limits.u_max(i)) {
        rd.fail(lp + "u_min[" + std::to_string(i) + "]", "exceeds u_max");
      }
      if (sc.limits.du_min(i) > sc.limits.du_max(i)) {
        rd.fail(lp + "du_min[" + std::to_string(i) + "]", "exceeds du_max");
      }
    }
    for (Index i = 0; i < nz; ++i) {
      if (sc.limits.z_min(i) > sc.limits.z_max(i)) {
        rd.fail(lp + "z_min[" + std::to_string(i) + "]", "exceeds z_max");
      }
    }
  } else if (!ctrl.is_null()) {
    rd.fail("controller", "expected an object");
  }

  sc.T_sim = rd.number_or(root, "T_sim", "", 0.0) * unit;
  if (!root.contains("T_sim")) rd.fail("T_sim", "required");
  sc.reference = rd.schedule(root, "reference", nz, unit);
  sc.input_reference = rd.schedule(root, "input_reference", nu, unit);
  sc.disturbance = rd.schedule(root, "disturbance", nd, unit);

  if (root.contains("seed")) {
    const json& s = root.at("seed");
    if (s.is_number_unsigned()) sc.seed = s.get<std::uint64_t>();
    else rd.fail("seed", "expected a nonnegative integer");
  }
  const std::string mode = root.value("mode", std::string("det"));
  if (mode == "det" || mode == "deterministic") sc.mode = NoiseMode::Deterministic;
  else if (mode == "stoch" || mode == "stochastic") sc.mode = NoiseMode::Stochastic;
  else rd.fail("mode", "must be \"det\" or \"stoch\"");

  static const char* known[] = {"name", "time_unit", "plant", "model", "controller", "T_sim", "reference",
                                "input_reference", "disturbance", "seed", "mode", "description"};
  for (const auto& [key, value] : root.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) rd.fail(key, "unknown key");
  }

  if (rd.issues.empty()) {
    try {
      sc.validate();
    } catch (const std::invalid_argument& e) {
      rd.fail("", e.what());
    }
  }
  if (!rd.issues.empty()) throw ConfigError(source, rd.issues);
  return sc;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), {{"", "cannot open file"}});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

namespace {

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v(i))) a.push_back(nullptr);
    else a.push_back(v(i));
  }
  return a;
}

json to_json(const TransferMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const RationalTransfer& tf = m(i, j);
      if (tf.is_zero() && tf == RationalTransfer::zero()) row.push_back(nullptr);
      else row.push_back({{"num", tf.num}, {"den", tf.den}, {"delay", tf.delay}});
    }
    rows.push_back(row);
  }
  return rows;
}

json to_json(const ContinuousWeights& w) {
  return {{"Q_cz", to_json(w.Q_cz)},   {"Q_cu", to_json(w.Q_cu)},     {"Q_cdu", to_json(w.Q_cdu)},
          {"q_ceco", to_json(w.q_ceco)}, {"Q_cxi", to_json(w.Q_cxi)}, {"Q_ceta", to_json(w.Q_ceta)},
          {"q_cxi", to_json(w.q_cxi)},   {"q_ceta", to_json(w.q_ceta)}};
}

json to_json(const Schedule& s) {
  json a = json::array();
  for (std::size_t i = 0; i < s.times.size(); ++i) a.push_back({{"t", s.times[i]}, {"value", to_json(s.values[i])}});
  return a;
}

}  // namespace

std::string serialize_config(const ScenarioConfig& sc) {
  json j;
  j["name"] = sc.name;
  j["time_unit"] = "seconds";
  j["plant"] = {{"G", to_json(sc.plant_G)}, {"Ts", sc.Ts}, {"R_ww", to_json(sc.R_ww)}, {"R_vv", to_json(sc.R_vv)}};
  if (sc.plant_Gd.cols() > 0) j["plant"]["Gd"] = to_json(sc.plant_Gd);
  j["model"] = {{"G", to_json(sc.model_G)}, {"H", to_json(sc.model_H)}};
  j["controller"] = {{"Ts", sc.Ts_controller},
                     {"N", sc.N},
                     {"weights", to_json(sc.weights)},
                     {"dt_weights", to_json(sc.dt_weights)},
                     {"limits",
                      {{"u_min", to_json(sc.limits.u_min)},
                       {"u_max", to_json(sc.limits.u_max)},
                       {"du_min", to_json(sc.limits.du_min)},
                       {"du_max", to_json(sc.limits.du_max)},
                       {"z_min", to_json(sc.limits.z_min)},
                       {"z_max", to_json(sc.limits.z_max)}}}};
  j["T_sim"] = sc.T_sim;
  j["reference"] = to_json(sc.reference);
  j["input_reference"] = to_json(sc.input_reference);
  j["disturbance"] = to_json(sc.disturbance);
  j["seed"] = sc.seed;
  j["mode"] = to_string(sc.mode);
  return j.dump(2) + "\n";
}

}  // namespace ctlmpc
