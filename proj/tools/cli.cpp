#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "fibermc/config.hpp"
#include "fibermc/inverse.hpp"
#include "fibermc/mc.hpp"
#include "fibermc/mh.hpp"
#include "fibermc/parallel.hpp"

namespace fibermc::cli {

namespace {

/// Raised for bad flags or inputs that should exit with the usage code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedVoxel {
  const char* name;
  Vec3 position;
};

constexpr NamedVoxel kReportVoxels[] = {
    {"v1", {0.0, 0.2, 0.0}},  {"v2", {0.0, 0.6, 0.0}},   {"v3", {0.0, 0.0, -0.2}},
    {"v4", {0.0, 0.0, -0.6}}, {"v5", {0.0, 0.2, -0.2}},  {"v6", {0.0, 0.6, -0.6}},
};

enum class Method { mc, mc_some, mh };

Method parse_method(const std::string& name) {
  if (name == "mc") return Method::mc;
  if (name == "mc-some") return Method::mc_some;
  if (name == "mh") return Method::mh;
  throw UsageError(fmt::format("unknown method '{}' (expected mc, mc-some or mh)", name));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw std::runtime_error(fmt::format("error while writing '{}'", path));
}

Vec3 parse_point(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("'{}' is not a point 'x,y,z'", text));
    }
  }
  if (v.size() != 3) throw UsageError(fmt::format("'{}' is not a point 'x,y,z'", text));
  return {v[0], v[1], v[2]};
}

/// Run-summary sidecar: metadata as comments, then the resolved config, so the
/// file itself is a valid config.
void write_summary(const std::string& path, const std::string& command, const std::vector<std::pair<std::string, std::string>>& meta,
                   const Config& cfg, double wall_seconds) {
  std::ofstream out = open_out(path);
  out << "# fibermc " << command << " run summary\n";
  for (const auto& [k, v] : meta) out << "# " << k << " = " << v << "\n";
  out << fmt::format("# wall_time_s = {:.3f}\n", wall_seconds);
  out << cfg.to_text();
  close_out(out, path);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct SimOutput {
  FluenceField field;
  std::optional<double> acceptance_rate;
  std::optional<ChainResult> chain;
};

SimOutput simulate(const Config& cfg, Method method, const RandomStream& stream, const RunOptions& run) {
  const Scenario sc = cfg.scenario();
  switch (method) {
    case Method::mc:
      return {estimate_mc(sc, cfg.M, stream, run), std::nullopt, std::nullopt};
    case Method::mc_some:
      return {estimate_mc_some(sc, cfg.mc_some(), stream, run), std::nullopt, std::nullopt};
    case Method::mh:
      break;
  }
  ChainResult chain = run_chain(sc, cfg.mh(), stream);
  FluenceField field = chain.field;
  const double rate = chain.acceptance_rate;
  return {std::move(field), rate, std::move(chain)};
}

std::string method_name(Method m) {
  switch (m) {
    case Method::mc:
      return "mc";
    case Method::mc_some:
      return "mc-some";
    case Method::mh:
      break;
  }
  return "mh";
}

std::uint64_t total_samples(const Config& cfg, Method m) {
  switch (m) {
    case Method::mc:
      return cfg.M;
    case Method::mc_some:
      return cfg.M * cfg.M_points * cfg.M_rot;
    case Method::mh:
      break;
  }
  return (cfg.T - static_cast<std::uint64_t>(std::floor(cfg.burn_in_frac * static_cast<double>(cfg.T)))) * cfg.M_rot;
}

struct Options {
  std::string config;
  std::string method{"mc-some"};
  std::uint64_t seed{1};
  std::string out;
  unsigned threads{0};
  unsigned replicates{50};
  std::string measurements;
  std::string grid;
  std::string line_axis{"y"};
  std::string line_through{"0,0,0"};
  std::string field;
  std::string trace;
  std::size_t trace_stride{1};
  std::string positions;
};

int cmd_simulate(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(o.config);
  const Method method = parse_method(o.method);
  const SimOutput res = simulate(cfg, method, RandomStream(o.seed), RunOptions{o.threads});
  std::ofstream out = open_out(o.out);
  res.field.write_csv(out);
  close_out(out, o.out);
  if (res.chain && !o.trace.empty()) {
    std::ofstream tr = open_out(o.trace);
    write_chain_trace(tr, *res.chain, o.trace_stride);
    close_out(tr, o.trace);
  }
  std::vector<std::pair<std::string, std::string>> meta = {
      {"method", method_name(method)},
      {"seed", std::to_string(o.seed)},
      {"total_samples", std::to_string(res.field.total_samples())},
      {"outside_samples", std::to_string(res.field.outside_samples())},
  };
  if (res.acceptance_rate) meta.emplace_back("acceptance_rate", fmt::format("{:.9g}", *res.acceptance_rate));
  write_summary(o.out + ".summary", "simulate", meta, cfg, seconds_since(start));
  return kExitOk;
}

struct FieldRow {
  int ix, iy, iz;
  double x, y, z, fluence, stderr_;
};

std::vector<FieldRow> read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read field '{}'", path));
  std::string line;
  if (!std::getline(in, line) || line != "ix,iy,iz,x,y,z,fluence,stderr,count") {
    throw std::runtime_error(fmt::format("'{}' is not a fluence field CSV", path));
  }
  std::vector<FieldRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FieldRow r{};
    unsigned long long count = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf,%lf,%lf,%lf,%lf,%llu", &r.ix, &r.iy, &r.iz, &r.x, &r.y, &r.z,
                    &r.fluence, &r.stderr_, &count) != 9) {
      throw std::runtime_error(fmt::format("malformed row in '{}': {}", path, line));
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error(fmt::format("field '{}' has no rows", path));
  return rows;
}

int cmd_extract_line(const Options& o) {
  int axis = -1;
  if (o.line_axis == "x") axis = 0;
  if (o.line_axis == "y") axis = 1;
  if (o.line_axis == "z") axis = 2;
  if (axis < 0) throw UsageError(fmt::format("line axis must be x, y or z, got '{}'", o.line_axis));
  const Vec3 through = parse_point(o.line_through);
  const std::vector<FieldRow> rows = read_field_csv(o.field);

  auto coord = [](const FieldRow& r, int a) { return a == 0 ? r.x : (a == 1 ? r.y : r.z); };
  auto index = [](const FieldRow& r, int a) { return a == 0 ? r.ix : (a == 1 ? r.iy : r.iz); };
  const double tp[3] = {through.x, through.y, through.z};
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;

  // Voxel edge and radius from the field itself.
  int m = 0;
  double h = 0.0;
  for (const auto& r : rows) {
    m = std::max(m, index(r, a1));
    if (index(r, a1) != 0 && h == 0.0) h = coord(r, a1) / index(r, a1);
  }
  if (m == 0 || !(h > 0.0)) throw std::runtime_error("cannot infer the voxel grid from the field");
  const auto i1 = static_cast<int>(std::ceil(tp[a1] / h - 0.5));
  const auto i2 = static_cast<int>(std::ceil(tp[a2] / h - 0.5));
  if (std::abs(i1) > m || std::abs(i2) > m) {
    throw UsageError(fmt::format("line through ({}) along {} misses the grid", o.line_through, o.line_axis));
  }
  std::vector<const FieldRow*> line;
  for (const auto& r : rows) {
    if (index(r, a1) == i1 && index(r, a2) == i2) line.push_back(&r);
  }
  std::sort(line.begin(), line.end(), [&](const FieldRow* a, const FieldRow* b) { return index(*a, axis) < index(*b, axis); });
  std::ofstream out = open_out(o.out);
  out << "coord,fluence,stderr\n";
  for (const FieldRow* r : line) out << fmt::format("{:.9g},{:.9g},{:.9g}\n", coord(*r, axis), r->fluence, r->stderr_);
  close_out(out, o.out);
  return kExitOk;
}

int cmd_replicate(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(o.config);
  const Method method = parse_method(o.method);
  if (o.replicates < 2) throw UsageError("replicate needs at least 2 replicates");
  const Scenario sc = cfg.scenario();
  const RandomStream root(o.seed);
  const std::size_t voxels = sc.grid.voxel_count();
  const unsigned R = o.replicates;

  std::vector<std::vector<double>> estimates(R);
  double acceptance_sum = 0.0;
  if (method == Method::mh) {
    // Chains are sequential; run replicates side by side.
    std::vector<double> rates(R, 0.0);
    parallel_for_units(R, o.threads, [&](unsigned, std::size_t r) {
      ChainResult c = run_chain(sc, cfg.mh(), root.derive(StreamPurpose::replicate, r));
      estimates[r] = c.field.estimates();
      rates[r] = c.acceptance_rate;
    });
    for (const double v : rates) acceptance_sum += v;
  } else {
    for (unsigned r = 0; r < R; ++r) {
      const SimOutput res = simulate(cfg, method, root.derive(StreamPurpose::replicate, r), RunOptions{o.threads});
      estimates[r] = res.field.estimates();
    }
  }

  std::vector<double> mean(voxels, 0.0);
  std::vector<double> mse(voxels, 0.0);
  for (std::size_t v = 0; v < voxels; ++v) {
    double s = 0.0;
    for (unsigned r = 0; r < R; ++r) s += estimates[r][v];
    mean[v] = s / R;
    double q = 0.0;
    for (unsigned r = 0; r < R; ++r) q += (estimates[r][v] - mean[v]) * (estimates[r][v] - mean[v]);
    mse[v] = q / R;
  }

  std::ofstream out = open_out(o.out);
  out << "ix,iy,iz,x,y,z,mean,mse\n";
  for (std::size_t v = 0; v < voxels; ++v) {
    const VoxelIndex idx = sc.grid.unflatten(v);
    const Vec3 c = sc.grid.center(idx);
    out << fmt::format("{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", idx.i, idx.j, idx.k, c.x, c.y, c.z, mean[v],
                       mse[v]);
  }
  close_out(out, o.out);

  const std::string named = o.out + ".voxels.csv";
  std::ofstream nv = open_out(named);
  nv << "voxel,x,y,z,mean,mse\n";
  for (const auto& rv : kReportVoxels) {
    const auto idx = sc.grid.locate(rv.position);
    if (!idx) continue;
    const std::size_t v = sc.grid.flatten(*idx);
    nv << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", rv.name, rv.position.x, rv.position.y, rv.position.z,
                      mean[v], mse[v]);
  }
  close_out(nv, named);

  std::vector<std::pair<std::string, std::string>> meta = {
      {"method", method_name(method)},
      {"seed", std::to_string(o.seed)},
      {"replicates", std::to_string(R)},
      {"total_samples", std::to_string(total_samples(cfg, method) * R)},
  };
  if (method == Method::mh) meta.emplace_back("acceptance_rate", fmt::format("{:.9g}", acceptance_sum / R));
  write_summary(o.out + ".summary", "replicate", meta, cfg, seconds_since(start));
  return kExitOk;
}

Measurements load_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read measurements '{}'", path));
  try {
    return read_measurements_csv(in);
  } catch (const std::runtime_error& e) {
    throw UsageError(fmt::format("{}: {}", path, e.what()));
  }
}

int cmd_fit(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(o.config);
  const Measurements meas = load_measurements(o.measurements);
  const DescentTrace trace =
      hybrid_descent(cfg.scenario(), meas, cfg.mu_s0, cfg.mu_a0, cfg.descent(RunOptions{o.threads}), RandomStream(o.seed));
  std::ofstream out = open_out(o.out);
  write_descent_csv(out, trace);
  close_out(out, o.out);
  const auto& last = trace.steps.back();
  write_summary(o.out + ".summary", "fit",
                {{"seed", std::to_string(o.seed)},
                 {"iterations", std::to_string(trace.steps.size())},
                 {"converged", trace.converged ? "true" : "false"},
                 {"final_mu_s", fmt::format("{:.9g}", last.mu_s)},
                 {"final_mu_a", fmt::format("{:.9g}", last.mu_a)},
                 {"final_J", fmt::format("{:.9g}", last.J)}},
                cfg, seconds_since(start));
  return kExitOk;
}

int cmd_scan(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(o.config);
  const Measurements meas = load_measurements(o.measurements);
  ScanGrid grid;
  try {
    grid = parse_scan_grid(o.grid);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto rows = sensitivity_scan(cfg.scenario(), grid, meas, cfg.mc_some(), RandomStream(o.seed), RunOptions{o.threads});
  std::ofstream out = open_out(o.out);
  write_scan_csv(out, rows);
  close_out(out, o.out);
  write_summary(o.out + ".summary", "scan", {{"seed", std::to_string(o.seed)}, {"triplets", std::to_string(rows.size())}},
                cfg, seconds_since(start));
  return kExitOk;
}

int cmd_measure(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(o.config);
  std::vector<Vec3> positions;
  if (o.positions.empty()) {
    positions = {kReportVoxels[1].position, kReportVoxels[3].position, kReportVoxels[5].position};
  } else {
    std::stringstream ss(o.positions);
    std::string item;
    while (std::getline(ss, item, ';')) positions.push_back(parse_point(item));
  }
  const Measurements meas =
      simulate_measurements(cfg.scenario(), positions, cfg.mc_some(), RandomStream(o.seed), RunOptions{o.threads});
  std::ofstream out = open_out(o.out);
  write_measurements_csv(out, meas);
  close_out(out, o.out);
  write_summary(o.out + ".summary", "measure", {{"seed", std::to_string(o.seed)}}, cfg, seconds_since(start));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fluence simulation and optical-parameter estimation for fiber-illuminated tissue", "fibermc"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool method) {
    sub->add_option("--config", o.config, "Scenario config file")->required();
    if (method) sub->add_option("--method", o.method, "Estimator: mc, mc-some or mh")->capture_default_str();
    sub->add_option("--seed", o.seed, "64-bit seed")->capture_default_str();
    sub->add_option("--out", o.out, "Output path")->required();
    sub->add_option("--threads", o.threads, "Worker threads (0: hardware parallelism)")->capture_default_str();
  };

  auto* simulate_cmd = app.add_subcommand("simulate", "Estimate the fluence field");
  add_common(simulate_cmd, true);
  simulate_cmd->add_option("--trace", o.trace, "Chain trace CSV (method mh)");
  simulate_cmd->add_option("--trace-stride", o.trace_stride, "Keep every n-th trace row")->check(CLI::PositiveNumber);

  auto* line_cmd = app.add_subcommand("extract-line", "Profile of a field along a line of voxels");
  line_cmd->add_option("--field", o.field, "Fluence field CSV")->required();
  line_cmd->add_option("--line-axis", o.line_axis, "x, y or z")->capture_default_str();
  line_cmd->add_option("--line-through", o.line_through, "Point 'x,y,z' on the line")->capture_default_str();
  line_cmd->add_option("--out", o.out, "Output path")->required();

  auto* rep_cmd = app.add_subcommand("replicate", "Per-voxel mean and MSE over independent replicates");
  add_common(rep_cmd, true);
  rep_cmd->add_option("--replicates", o.replicates, "Replicate count")->capture_default_str();

  auto* fit_cmd = app.add_subcommand("fit", "Estimate (mu_s, mu_a) from measurements");
  add_common(fit_cmd, false);
  fit_cmd->add_option("--measurements", o.measurements, "Measurements CSV")->required();

  auto* scan_cmd = app.add_subcommand("scan", "Score a grid of optical parameters against measurements");
  add_common(scan_cmd, false);
  scan_cmd->add_option("--measurements", o.measurements, "Measurements CSV")->required();
  scan_cmd->add_option("--grid", o.grid, "Axes, e.g. 'g=0.85,0.9;mu_a=0.5,1;mu_s=75,105'");

  auto* measure_cmd = app.add_subcommand("measure", "Synthetic measurements from a config");
  add_common(measure_cmd, false);
  measure_cmd->add_option("--positions", o.positions, "Points 'x,y,z;x,y,z' (default v2, v4, v6)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(o);
    if (*line_cmd) return cmd_extract_line(o);
    if (*rep_cmd) return cmd_replicate(o);
    if (*fit_cmd) return cmd_fit(o);
    if (*scan_cmd) return cmd_scan(o);
    if (*measure_cmd) return cmd_measure(o);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace fibermc::cli
