#include "cbf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cbf/errors.hpp"

namespace cbf {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"name"}},
      {"model", {}},  // id, gravity and model parameters; checked against the model
      {"barrier", {"kind", "center", "radius", "width", "limit", "bound", "side", "index"}},
      {"filter",
       {"kind", "alpha", "gamma", "alpha_e", "k_vel", "c_u", "c_l", "c_u_factor", "bound_factor",
        "bound_samples", "mode", "gravity_compensation", "gravity_precompensation",
        "complement"}},
      {"task",
       {"kind", "point", "velocity", "radius", "omega", "phase", "lambda", "offset", "amplitude",
        "frequency", "damping", "max_speed"}},
      {"initial", {"q", "qdot", "random", "velocity_scale", "margin", "q_lo", "q_hi"}},
      {"box", {"q_lo", "q_hi", "qdot_lo", "qdot_hi"}},
      {"sim", {"dt", "horizon", "seed", "tol"}},
      {"sweep", {"param", "values"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_key(const std::string& full) {
  const auto dot = full.find('.');
  if (dot == std::string::npos) return {"", full};
  return {full.substr(0, dot), full.substr(dot + 1)};
}

void check_key(const std::string& full, int line) {
  const auto [section, key] = split_key(full);
  const auto& keys = known_keys();
  auto it = keys.find(section);
  if (it == keys.end()) throw ConfigError("unknown section '" + section + "'", line);
  if (section == "model") {
    if (key.empty()) throw ConfigError("empty model key", line);
    return;
  }
  if (!it->second.count(key)) throw ConfigError("unknown key '" + full + "'", line);
}

double plain_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || first == last)
    throw ParameterError("not a number: '" + s + "'");
  return v;
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt(const Vec& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out;
}

std::string fmt(bool b) { return b ? "true" : "false"; }

// Typed access to a Settings map with line-aware errors.
class Reader {
 public:
  explicit Reader(const Settings& s) : s_(s) {}

  bool has(const std::string& key) const { return s_.count(key) > 0; }
  int line(const std::string& key) const {
    auto it = s_.find(key);
    return it == s_.end() ? 0 : it->second.line;
  }

  bool touch(const std::string& key) const { return used_.insert(key).second; }

  std::string str(const std::string& key, const std::string& def) const {
    used_.insert(key);
    auto it = s_.find(key);
    return it == s_.end() ? def : it->second.value;
  }
  std::string required(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key '" + key + "'");
    return str(key, {});
  }

  double num(const std::string& key, double def) const {
    if (!has(key)) return touch(key), def;
    return wrap(key, [&] { return parse_number(str(key, {})); });
  }
  std::uint64_t u64(const std::string& key, std::uint64_t def) const {
    if (!has(key)) return touch(key), def;
    return wrap(key, [&] {
      const std::string v = str(key, {});
      std::uint64_t out = 0;
      const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ParameterError("not a nonnegative integer: '" + v + "'");
      return out;
    });
  }
  int integer(const std::string& key, int def) const {
    if (!has(key)) return touch(key), def;
    return wrap(key, [&] {
      const std::string v = str(key, {});
      int out = 0;
      const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ParameterError("not an integer: '" + v + "'");
      return out;
    });
  }
  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return touch(key), def;
    return wrap(key, [&] {
      const std::string v = str(key, {});
      if (v == "true" || v == "1" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "no") return false;
      throw ParameterError("not a boolean: '" + v + "'");
    });
  }
  Vec vec(const std::string& key) const {
    if (!has(key)) return touch(key), Vec();
    return wrap(key, [&] {
      std::vector<double> xs;
      std::stringstream ss(str(key, {}));
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) xs.push_back(parse_number(item));
      }
      if (xs.size() > static_cast<std::size_t>(kMaxDim))
        throw ParameterError("vector longer than " + std::to_string(kMaxDim));
      Vec v(static_cast<int>(xs.size()));
      for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<int>(i)] = xs[i];
      return v;
    });
  }
  std::vector<int> ints(const std::string& key) const {
    const Vec v = vec(key);
    std::vector<int> out;
    for (int i = 0; i < v.size(); ++i) {
      if (v[i] != std::floor(v[i])) throw ConfigError("'" + key + "' expects integers", line(key));
      out.push_back(static_cast<int>(v[i]));
    }
    return out;
  }

  // Keys present in the settings that the chosen kinds never read.
  void reject_unused(const std::string& section) const {
    for (const auto& [key, setting] : s_) {
      if (split_key(key).first == section && !used_.count(key))
        throw ConfigError("key '" + key + "' does not apply here", setting.line);
    }
  }

  template <class F>
  auto wrap(const std::string& key, F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key + ": " + e.what(), line(key));
    }
  }

 private:
  const Settings& s_;
  mutable std::set<std::string> used_;
};

BarrierDescriptor read_barrier(const Reader& r) {
  const std::string kind = r.str("barrier.kind", "position_box");
  if (kind == "sphere_obstacle") {
    return SphereObstacle{r.vec("barrier.center"), r.num("barrier.radius", 0.0)};
  }
  if (kind == "angle_box") {
    return AngleBox{r.num("barrier.width", 0.0), r.num("barrier.center", std::numbers::pi),
                    r.integer("barrier.index", -1)};
  }
  if (kind == "position_box") {
    return PositionBox{r.num("barrier.limit", 0.0), r.integer("barrier.index", 0)};
  }
  if (kind == "angle_limit") {
    const std::string side = r.str("barrier.side", "lower");
    if (side != "lower" && side != "upper")
      throw ConfigError("barrier.side must be lower or upper", r.line("barrier.side"));
    return AngleLimit{r.num("barrier.bound", 0.0), side == "lower", r.integer("barrier.index", -1)};
  }
  throw ConfigError("unknown barrier kind '" + kind + "'", r.line("barrier.kind"));
}

}  // namespace

double parse_number(const std::string& text) {
  std::string s = trim(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  const auto pi_at = s.find("pi");
  if (pi_at == std::string::npos) return plain_number(s);
  // [sign][coef[*]]pi[/den]
  std::string coef = s.substr(0, pi_at);
  std::string rest = s.substr(pi_at + 2);
  if (!coef.empty() && coef.back() == '*') coef.pop_back();
  double c = 1.0;
  if (coef == "-") {
    c = -1.0;
  } else if (!coef.empty() && coef != "+") {
    c = plain_number(coef);
  }
  double den = 1.0;
  if (!rest.empty()) {
    if (rest[0] != '/') throw ParameterError("not a number: '" + text + "'");
    den = plain_number(rest.substr(1));
    if (den == 0.0) throw ParameterError("division by zero in '" + text + "'");
  }
  return c * std::numbers::pi / den;
}

Settings parse_settings(const std::string& text) {
  Settings out;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty() || !known_keys().count(section) )
        throw ConfigError("unknown section '" + section + "'", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("missing key before '='", line);
    const std::string full = section.empty() ? key : section + "." + key;
    check_key(full, line);
    if (out.count(full)) throw ConfigError("duplicate key '" + full + "'", line);
    out[full] = Setting{trim(s.substr(eq + 1)), line};
  }
  return out;
}

Scenario build_scenario(const Settings& settings) {
  Reader r(settings);
  Scenario sc;
  sc.name = r.str("name", sc.name);

  sc.model_id = r.str("model.id", sc.model_id);
  for (const auto& [key, setting] : settings) {
    const auto [section, name] = split_key(key);
    if (section != "model" || name == "id") continue;
    sc.model_params[name] = r.num(key, 0.0);
  }
  ModelPtr model;
  try {
    model = make_model(sc.model_id, {});
  } catch (const Error& e) {
    throw ConfigError(e.what(), r.line("model.id"));
  }
  const ParamMap defaults = model->params();
  for (const auto& [name, value] : sc.model_params) {
    if (name != "gravity" && !defaults.count(name))
      throw ConfigError("unknown parameter 'model." + name + "' for " + sc.model_id,
                        r.line("model." + name));
  }
  try {
    model = make_model(sc.model_id, sc.model_params);
  } catch (const Error& e) {
    throw ConfigError(e.what(), r.line("model.id"));
  }

  sc.barrier = read_barrier(r);
  r.reject_unused("barrier");
  try {
    barrier_catalog(sc.barrier, model);
  } catch (const Error& e) {
    throw ConfigError(e.what(), r.line("barrier.kind"));
  }

  FilterSpec& f = sc.filter;
  f.kind = r.wrap("filter.kind", [&] { return filter_kind_from_string(r.str("filter.kind", "none")); });
  const std::string shape = r.str("filter.alpha", "linear");
  ClassKappa::Kind ak;
  if (shape == "linear") {
    ak = ClassKappa::Kind::linear;
  } else if (shape == "cubic") {
    ak = ClassKappa::Kind::cubic;
  } else {
    throw ConfigError("filter.alpha must be linear or cubic", r.line("filter.alpha"));
  }
  const double gamma = r.num("filter.gamma", 1.0);
  f.alpha = r.wrap("filter.gamma", [&] { return make_class_kappa(ak, gamma); });
  f.alpha_e = r.num("filter.alpha_e", f.alpha_e);
  f.k_vel = r.num("filter.k_vel", f.k_vel);
  const auto bound_value = [&](const std::string& key) {
    const std::string v = r.str(key, "auto");
    return v == "auto" ? 0.0 : r.num(key, 0.0);
  };
  f.c_u = bound_value("filter.c_u");
  f.c_l = bound_value("filter.c_l");
  f.c_u_factor = r.num("filter.c_u_factor", f.c_u_factor);
  f.bound_factor = r.num("filter.bound_factor", f.bound_factor);
  f.bound_samples = r.u64("filter.bound_samples", f.bound_samples);
  const std::string mode = r.str("filter.mode", "keep_gravity");
  if (mode == "keep_gravity") {
    f.mode = GravityMode::keep_gravity;
  } else if (mode == "drop_gravity") {
    f.mode = GravityMode::drop_gravity;
  } else {
    throw ConfigError("filter.mode must be keep_gravity or drop_gravity", r.line("filter.mode"));
  }
  f.gravity_compensation = r.flag("filter.gravity_compensation", f.gravity_compensation);
  f.gravity_precompensation = r.flag("filter.gravity_precompensation", f.gravity_precompensation);
  f.complement = r.ints("filter.complement");

  TaskSpec& t = sc.task;
  t.kind = r.wrap("task.kind", [&] { return task_kind_from_string(r.str("task.kind", "joint_setpoint")); });
  switch (t.kind) {
    case TaskSpec::Kind::circle:
      t.radius = r.num("task.radius", 0.0);
      t.omega = r.num("task.omega", 0.0);
      t.phase = r.num("task.phase", 0.0);
      [[fallthrough]];
    case TaskSpec::Kind::setpoint:
    case TaskSpec::Kind::joint_setpoint:
      t.point = r.vec("task.point");
      t.lambda = r.num("task.lambda", t.lambda);
      t.max_speed = r.num("task.max_speed", 0.0);
      break;
    case TaskSpec::Kind::line:
      t.point = r.vec("task.point");
      t.velocity = r.vec("task.velocity");
      t.lambda = r.num("task.lambda", t.lambda);
      t.max_speed = r.num("task.max_speed", 0.0);
      break;
    case TaskSpec::Kind::sinusoid_input:
      t.amplitude = r.num("task.amplitude", 0.0);
      t.frequency = r.num("task.frequency", 0.0);
      [[fallthrough]];
    case TaskSpec::Kind::constant_input:
      t.offset = r.num("task.offset", 0.0);
      t.damping = r.num("task.damping", 0.0);
      break;
  }
  r.reject_unused("task");

  sc.initial.q = r.vec("initial.q");
  sc.initial.qdot = r.vec("initial.qdot");
  sc.initial.random = r.flag("initial.random", false);
  sc.initial.velocity_scale = r.num("initial.velocity_scale", 0.0);
  sc.initial.margin = r.num("initial.margin", sc.initial.margin);
  sc.initial.q_lo = r.vec("initial.q_lo");
  sc.initial.q_hi = r.vec("initial.q_hi");
  if (!sc.initial.random && sc.initial.qdot.size() == 0 && sc.initial.q.size() > 0)
    sc.initial.qdot = Vec::Zero(sc.initial.q.size());

  if (r.has("box.q_lo") || r.has("box.q_hi") || r.has("box.qdot_lo") || r.has("box.qdot_hi")) {
    const StateBox def = model->default_box();
    StateBox b{r.has("box.q_lo") ? r.vec("box.q_lo") : def.q_lo,
               r.has("box.q_hi") ? r.vec("box.q_hi") : def.q_hi,
               r.has("box.qdot_lo") ? r.vec("box.qdot_lo") : def.qdot_lo,
               r.has("box.qdot_hi") ? r.vec("box.qdot_hi") : def.qdot_hi};
    sc.box = b;
  }

  sc.dt = r.num("sim.dt", sc.dt);
  sc.horizon = r.num("sim.horizon", sc.horizon);
  sc.seed = r.u64("sim.seed", sc.seed);
  sc.tol = r.num("sim.tol", sc.tol);

  try {
    validate(sc, *model);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

Settings scenario_settings(const Scenario& sc) {
  Settings s;
  const auto set = [&](const std::string& k, std::string v) { s[k] = Setting{std::move(v), 0}; };
  set("name", sc.name);
  set("model.id", sc.model_id);
  for (const auto& [k, v] : sc.model_params) set("model." + k, fmt(v));

  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, SphereObstacle>) {
          set("barrier.kind", "sphere_obstacle");
          set("barrier.center", fmt(b.center));
          set("barrier.radius", fmt(b.radius));
        } else if constexpr (std::is_same_v<T, AngleBox>) {
          set("barrier.kind", "angle_box");
          set("barrier.width", fmt(b.width));
          set("barrier.center", fmt(b.center));
          set("barrier.index", std::to_string(b.index));
        } else if constexpr (std::is_same_v<T, PositionBox>) {
          set("barrier.kind", "position_box");
          set("barrier.limit", fmt(b.limit));
          set("barrier.index", std::to_string(b.index));
        } else {
          set("barrier.kind", "angle_limit");
          set("barrier.bound", fmt(b.bound));
          set("barrier.side", b.lower ? "lower" : "upper");
          set("barrier.index", std::to_string(b.index));
        }
      },
      sc.barrier);

  const FilterSpec& f = sc.filter;
  set("filter.kind", to_string(f.kind));
  set("filter.alpha", f.alpha.kind == ClassKappa::Kind::linear ? "linear" : "cubic");
  set("filter.gamma", fmt(f.alpha.gain));
  set("filter.alpha_e", fmt(f.alpha_e));
  set("filter.k_vel", fmt(f.k_vel));
  set("filter.c_u", f.c_u > 0.0 ? fmt(f.c_u) : "auto");
  set("filter.c_l", f.c_l > 0.0 ? fmt(f.c_l) : "auto");
  set("filter.c_u_factor", fmt(f.c_u_factor));
  set("filter.bound_factor", fmt(f.bound_factor));
  set("filter.bound_samples", std::to_string(f.bound_samples));
  set("filter.mode", f.mode == GravityMode::keep_gravity ? "keep_gravity" : "drop_gravity");
  set("filter.gravity_compensation", fmt(f.gravity_compensation));
  set("filter.gravity_precompensation", fmt(f.gravity_precompensation));
  {
    std::string c;
    for (std::size_t i = 0; i < f.complement.size(); ++i)
      c += (i ? ", " : "") + std::to_string(f.complement[i]);
    set("filter.complement", c);
  }

  const TaskSpec& t = sc.task;
  set("task.kind", to_string(t.kind));
  switch (t.kind) {
    case TaskSpec::Kind::circle:
      set("task.radius", fmt(t.radius));
      set("task.omega", fmt(t.omega));
      set("task.phase", fmt(t.phase));
      [[fallthrough]];
    case TaskSpec::Kind::setpoint:
    case TaskSpec::Kind::joint_setpoint:
      set("task.point", fmt(t.point));
      set("task.lambda", fmt(t.lambda));
      set("task.max_speed", fmt(t.max_speed));
      break;
    case TaskSpec::Kind::line:
      set("task.point", fmt(t.point));
      set("task.velocity", fmt(t.velocity));
      set("task.lambda", fmt(t.lambda));
      set("task.max_speed", fmt(t.max_speed));
      break;
    case TaskSpec::Kind::sinusoid_input:
      set("task.amplitude", fmt(t.amplitude));
      set("task.frequency", fmt(t.frequency));
      [[fallthrough]];
    case TaskSpec::Kind::constant_input:
      set("task.offset", fmt(t.offset));
      set("task.damping", fmt(t.damping));
      break;
  }

  if (sc.initial.q.size() > 0) set("initial.q", fmt(sc.initial.q));
  if (sc.initial.qdot.size() > 0) set("initial.qdot", fmt(sc.initial.qdot));
  set("initial.random", fmt(sc.initial.random));
  set("initial.velocity_scale", fmt(sc.initial.velocity_scale));
  set("initial.margin", fmt(sc.initial.margin));
  if (sc.initial.q_lo.size() > 0) set("initial.q_lo", fmt(sc.initial.q_lo));
  if (sc.initial.q_hi.size() > 0) set("initial.q_hi", fmt(sc.initial.q_hi));

  if (sc.box) {
    set("box.q_lo", fmt(sc.box->q_lo));
    set("box.q_hi", fmt(sc.box->q_hi));
    set("box.qdot_lo", fmt(sc.box->qdot_lo));
    set("box.qdot_hi", fmt(sc.box->qdot_hi));
  }

  set("sim.dt", fmt(sc.dt));
  set("sim.horizon", fmt(sc.horizon));
  set("sim.seed", std::to_string(sc.seed));
  set("sim.tol", fmt(sc.tol));
  return s;
}

std::string serialize_settings(const Settings& settings) {
  // Group by section in a fixed order so the text is stable.
  static const std::vector<std::string> order{"",        "model", "barrier", "filter", "task",
                                              "initial", "box",   "sim",     "sweep",  "output"};
  std::string out;
  for (const std::string& section : order) {
    bool opened = false;
    for (const auto& [key, setting] : settings) {
      const auto [sec, name] = split_key(key);
      if (sec != section) continue;
      if (!opened && !section.empty()) out += (out.empty() ? "[" : "\n[") + section + "]\n";
      opened = true;
      out += name + " = " + setting.value + "\n";
    }
  }
  return out;
}

std::string serialize_scenario(const Scenario& scenario) {
  return serialize_settings(scenario_settings(scenario));
}

Scenario parse_scenario(const std::string& text) { return build_scenario(parse_settings(text)); }

std::string scenario_hash(const Scenario& scenario) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_scenario(scenario)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_override(Settings& settings, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' lacks '='");
  const std::string key = trim(assignment.substr(0, eq));
  check_key(key, 0);
  settings[key] = Setting{trim(assignment.substr(eq + 1)), 0};
}

ScenarioFile load_scenario_file(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioFile file;
  try {
    file.settings = parse_settings(buf.str());
    for (const auto& o : overrides) apply_override(file.settings, o);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }

  Settings scenario_only;
  for (const auto& [key, setting] : file.settings) {
    const auto section = split_key(key).first;
    if (section == "sweep") continue;
    if (section == "output") {
      file.output_dir = setting.value;
      continue;
    }
    scenario_only[key] = setting;
  }
  try {
    file.scenario = build_scenario(scenario_only);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (file.settings.count("sweep.param") || file.settings.count("sweep.values")) {
    SweepSpec sw;
    sw.param = file.settings.count("sweep.param") ? file.settings.at("sweep.param").value : "";
    std::stringstream ss(file.settings.count("sweep.values") ? file.settings.at("sweep.values").value
                                                               : "");
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) sw.values.push_back(item);
    }
    file.sweep = sw;
  }
  return file;
}

std::vector<Scenario> expand_sweep(const Settings& base, const SweepSpec& sweep) {
  if (sweep.param.empty()) throw ConfigError("sweep parameter is empty");
  if (sweep.values.empty()) throw ConfigError("sweep value list is empty");
  check_key(sweep.param, 0);
  const auto section = split_key(sweep.param).first;
  if (section == "sweep" || section == "output")
    throw ConfigError("cannot sweep '" + sweep.param + "'");
  Settings scenario_only;
  for (const auto& [key, setting] : base) {
    const auto sec = split_key(key).first;
    if (sec != "sweep" && sec != "output") scenario_only[key] = setting;
  }
  std::vector<Scenario> out;
  const std::string name = scenario_only.count("name") ? scenario_only.at("name").value : "scenario";
  for (const std::string& v : sweep.values) {
    Settings s = scenario_only;
    s[sweep.param] = Setting{v, 0};
    s["name"] = Setting{name + "[" + sweep.param + "=" + v + "]", 0};
    out.push_back(build_scenario(s));
  }
  return out;
}

std::optional<std::string> output_dir_from_env() {
  const char* v = std::getenv("CBFSIM_OUT_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace cbf
