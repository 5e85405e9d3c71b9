#include "fibermc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace fibermc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& text, const std::string& key, const std::string& origin) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(fmt::format("{}: invalid value '{}' for key '{}'", origin, text, key));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError(fmt::format("{}: non-finite value for key '{}'", origin, key));
  }
  return v;
}

struct Field {
  const char* name;
  bool required;
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <class T>
Field make_field(const char* name, bool required, T Config::*member) {
  return Field{name, required,
               [member, name](Config& c, const std::string& text, const std::string& origin) {
                 c.*member = parse_value<T>(text, name, origin);
               },
               [member](const Config& c) {
                 if constexpr (std::is_floating_point_v<T>) {
                   return fmt::format("{}", c.*member);
                 } else {
                   return fmt::format("{}", c.*member);
                 }
               }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      make_field("mu_s", true, &Config::mu_s),
      make_field("mu_a", true, &Config::mu_a),
      make_field("g", true, &Config::g),
      make_field("alpha", true, &Config::alpha),
      make_field("c", true, &Config::c),
      make_field("voxel_edge", true, &Config::voxel_edge),
      make_field("grid_radius", true, &Config::grid_radius),
      make_field("M", false, &Config::M),
      make_field("M_points", false, &Config::M_points),
      make_field("M_rot", false, &Config::M_rot),
      make_field("T", false, &Config::T),
      make_field("j", false, &Config::j),
      make_field("J", false, &Config::J),
      make_field("epsilon", false, &Config::epsilon),
      make_field("burn_in_frac", false, &Config::burn_in_frac),
      make_field("lambda", false, &Config::lambda),
      make_field("eps_score", false, &Config::eps_score),
      make_field("tau0", false, &Config::tau0),
      make_field("iter_cap", false, &Config::iter_cap),
      make_field("mu_s0", false, &Config::mu_s0),
      make_field("mu_a0", false, &Config::mu_a0),
      make_field("fit_M", false, &Config::fit_M),
      make_field("fit_M_points", false, &Config::fit_M_points),
      make_field("fit_M_rot", false, &Config::fit_M_rot),
  };
  return table;
}

}  // namespace

void Config::validate() const {
  try {
    (void)scenario();
    mh().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (M == 0 || M_points == 0 || M_rot == 0) throw ConfigError("M, M_points and M_rot must be positive");
  if (fit_M == 0 || fit_M_points == 0 || fit_M_rot == 0) {
    throw ConfigError("fit_M, fit_M_points and fit_M_rot must be positive");
  }
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(eps_score >= 0.0)) throw ConfigError("eps_score must be nonnegative");
  if (!(tau0 > 0.0)) throw ConfigError("tau0 must be positive");
  if (!(mu_s0 > 0.0 && mu_a0 > 0.0)) throw ConfigError("mu_s0 and mu_a0 must be positive");
}

Scenario Config::scenario() const {
  SourceSpec source{alpha, c};
  source.validate();
  return Scenario{OpticalParams(mu_s, mu_a, g), source, VoxelGrid(voxel_edge, grid_radius)};
}

MhParams Config::mh() const {
  MhParams p;
  p.j = j;
  p.J = J;
  p.epsilon = epsilon;
  p.steps = T;
  p.rotations = M_rot;
  p.burn_in_frac = burn_in_frac;
  return p;
}

DescentOptions Config::descent(const RunOptions& run) const {
  DescentOptions o;
  o.lambda = lambda;
  o.eps_score = eps_score;
  o.tau0 = tau0;
  o.iter_cap = iter_cap;
  o.samples = {fit_M, fit_M_points, fit_M_rot};
  o.run = run;
  return o;
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.name, f.get(*this));
  return out;
}

Config parse_config(std::istream& in, const std::string& origin) {
  Config cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.name; });
    if (it == table.end()) throw ConfigError(fmt::format("{}:{}: unknown key '{}'", origin, lineno, key));
    if (!seen.insert(key).second) throw ConfigError(fmt::format("{}:{}: key '{}' given twice", origin, lineno, key));
    it->set(cfg, value, fmt::format("{}:{}", origin, lineno));
  }
  for (const auto& f : fields()) {
    if (f.required && !seen.count(f.name)) throw ConfigError(fmt::format("{}: missing required key '{}'", origin, f.name));
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  return parse_config(in, path);
}

}  // namespace fibermc
