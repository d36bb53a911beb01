// ncindex: experiment runner. Each subcommand writes report.json, table.csv and
// (where a series makes sense) plotdata.csv into --out.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncindex/experiments.hpp"
#include "ncindex/io.hpp"
#include "ncindex/models.hpp"

using namespace ncindex;
using json = nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- fields

enum class Kind { Int, Double, Bool, String, IntList, DoubleList };

struct Field {
  std::string key;
  Kind kind;
  json def;
  std::string help;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::vector<std::string> choices = {};
};

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

void check_range(const Field& f, double v, const std::string& path) {
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  if (v < f.lo || v > f.hi) {
    std::ostringstream os;
    os << path << ": " << v << " outside [" << f.lo << ", " << f.hi << "]";
    throw ConfigError(os.str());
  }
}

json check_scalar(const Field& f, Kind k, const json& v, const std::string& path) {
  switch (k) {
    case Kind::Int:
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      check_range(f, v.get<double>(), path);
      return v;
    case Kind::Double:
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
      check_range(f, v.get<double>(), path);
      return json(v.get<double>());
    case Kind::Bool:
      if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
      return v;
    case Kind::String:
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      if (!f.choices.empty() && std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) == f.choices.end()) {
        std::string all;
        for (const auto& c : f.choices) all += (all.empty() ? "" : ", ") + c;
        throw ConfigError(path + ": expected one of " + all);
      }
      return v;
    default:
      throw std::logic_error("check_scalar");
  }
}

json check_value(const Field& f, const json& v, const std::string& path) {
  if (f.kind != Kind::IntList && f.kind != Kind::DoubleList) return check_scalar(f, f.kind, v, path);
  if (!v.is_array()) throw ConfigError(path + ": expected an array");
  if (v.empty()) throw ConfigError(path + ": must not be empty");
  json out = json::array();
  const Kind elem = f.kind == Kind::IntList ? Kind::Int : Kind::Double;
  for (size_t i = 0; i < v.size(); ++i) out.push_back(check_scalar(f, elem, v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// command-line text to a JSON value of the field's kind
json parse_text(const Field& f, const std::string& text, const std::string& path) {
  auto number = [&](const std::string& t, bool integer) -> json {
    size_t pos = 0;
    try {
      if (integer) {
        const long v = std::stol(t, &pos);
        if (pos == t.size()) return json(v);
      } else {
        const double v = std::stod(t, &pos);
        if (pos == t.size()) return json(v);
      }
    } catch (const std::exception&) {
    }
    throw ConfigError(path + ": cannot parse '" + t + "' as " + (integer ? "an integer" : "a number"));
  };
  switch (f.kind) {
    case Kind::Int:
      return number(text, true);
    case Kind::Double:
      return number(text, false);
    case Kind::Bool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError(path + ": expected true or false");
    case Kind::String:
      return text;
    case Kind::IntList:
    case Kind::DoubleList: {
      json out = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(number(item, f.kind == Kind::IntList));
      return out;
    }
  }
  throw std::logic_error("parse_text");
}

// Effective parameters for one command: defaults, then the config section, then flags.
class Params {
 public:
  Params(std::string command, std::vector<Field> fields) : command_(std::move(command)), fields_(std::move(fields)) {}

  void attach(CLI::App* sub) {
    for (const auto& f : fields_) {
      std::ostringstream def;
      def << f.def.dump();
      sub->add_option("--" + dashed(f.key), text_[f.key], f.help + " (default " + def.str() + ")");
    }
  }

  void resolve(const json& config) {
    values_ = json::object();
    const std::string base = "config." + command_;
    json section = json::object();
    if (config.contains(command_)) {
      section = config.at(command_);
      if (!section.is_object()) throw ConfigError(base + ": expected an object");
      for (const auto& [k, v] : section.items())
        if (std::none_of(fields_.begin(), fields_.end(), [&](const Field& f) { return f.key == k; }))
          throw ConfigError(base + "." + k + ": unknown field");
    }
    for (const auto& f : fields_) {
      json v = f.def;
      if (section.contains(f.key)) v = check_value(f, section.at(f.key), base + "." + f.key);
      const auto it = text_.find(f.key);
      if (it != text_.end() && !it->second.empty()) {
        const std::string path = "--" + dashed(f.key);
        v = check_value(f, parse_text(f, it->second, path), path);
      }
      values_[f.key] = v;
    }
  }

  const json& values() const { return values_; }
  int i(const std::string& k) const { return values_.at(k).get<int>(); }
  double d(const std::string& k) const { return values_.at(k).get<double>(); }
  bool b(const std::string& k) const { return values_.at(k).get<bool>(); }
  std::string s(const std::string& k) const { return values_.at(k).get<std::string>(); }
  std::vector<int> il(const std::string& k) const { return values_.at(k).get<std::vector<int>>(); }
  std::vector<double> dl(const std::string& k) const { return values_.at(k).get<std::vector<double>>(); }
  std::string path(const std::string& k) const { return "config." + command_ + "." + k; }

 private:
  std::string command_;
  std::vector<Field> fields_;
  std::map<std::string, std::string> text_;
  json values_;
};

// ---------------------------------------------------------------- output

struct Bundle {
  json results = json::array();
  json summary = json::object();
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<double, double>> plot;
  bool reliable = true;
  bool passed = true;
};

std::string num(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string num(long v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(bool v) { return v ? "1" : "0"; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << body;
}

void write_bundle(const std::filesystem::path& dir, const std::string& command, const json& config, unsigned long seed,
                  const Bundle& b, long runtime_ms) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  for (size_t i = 0; i < b.header.size(); ++i) csv << (i ? "," : "") << b.header[i];
  csv << "\n";
  for (const auto& r : b.rows) {
    for (size_t i = 0; i < r.size(); ++i) csv << (i ? "," : "") << r[i];
    csv << "\n";
  }
  write_text(dir / "table.csv", csv.str());
  if (!b.plot.empty()) {
    std::ostringstream p;
    p << "x,y\n";
    for (const auto& [x, y] : b.plot) p << num(x) << "," << num(y) << "\n";
    write_text(dir / "plotdata.csv", p.str());
  }
  json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = command;
  report["seed"] = seed;
  report["config"] = config;
  report["results"] = b.results;
  report["summary"] = b.summary;
  report["reliable"] = b.reliable;
  report["passed"] = b.passed;
  report["runtime_ms"] = runtime_ms;
  write_text(dir / "report.json", report.dump(2) + "\n");
}

// Runs task(i) for i < count on at most `jobs` threads; results land in index order.
template <class T, class F>
std::vector<T> parallel_map(int count, int jobs, F task) {
  std::vector<T> out(static_cast<size_t>(count));
  std::vector<std::exception_ptr> err(static_cast<size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[i] = task(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(jobs, count); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<std::string> index_columns(const IndexReport& r) { return split_csv(csv_row(r)); }
std::vector<std::string> index_header() { return split_csv(csv_header()); }

template <class... Extra>
std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const CliffordRep& gammas(int n) {
  static std::map<int, CliffordRep> cache;
  static std::mutex lock;
  std::lock_guard<std::mutex> g(lock);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gammas(n)).first;
  return it->second;
}

ModeElement load_input(const Params& p, int required_parity) {
  const std::string path = p.s("input");
  if (path.empty()) throw ConfigError(p.path("input") + ": required when model is 'file'");
  ModeElement a;
  try {
    a = load_mode_element(path);
  } catch (const std::exception& e) {
    throw ConfigError(p.path("input") + ": " + e.what());
  }
  if (required_parity >= 0 && a.n % 2 != required_parity)
    throw ConfigError(p.path("input") + ": element has n = " + std::to_string(a.n) + " of the wrong parity");
  return a;
}

struct Context {
  int jobs = 1;
  unsigned long seed = 1;
};

// ---------------------------------------------------------------- commands

Bundle gohberg_krein(const Params& p, const Context& ctx) {
  const int W = p.i("max_winding"), M = p.i("cutoff");
  const int flow_cutoff = p.i("flow_cutoff") > 0 ? p.i("flow_cutoff") : M;
  IndexOptions io;
  io.tol = p.d("tol");
  const auto reports = parallel_map<IndexReport>(2 * W + 1, ctx.jobs, [&](int k) {
    const int w = k - W;
    const ModeElement u = winding_unitary(w);
    auto build = [&](int c) { return toeplitz_compress(u, SkewMatrix::zero(1), make_spec(1, c, 1, gammas(1)), gammas(1)); };
    IndexReport r = numerical_index(build, M, io);
    r.label = "w=" + std::to_string(w);
    r.local_value = odd_local_index(u, SkewMatrix::zero(1));
    if (p.b("flow"))
      r.spectral_flow =
          dirac_conjugation_flow(u, SkewMatrix::zero(1), make_spec(1, flow_cutoff, 1, gammas(1)), gammas(1), p.i("flow_steps")).flow;
    return r;
  });
  Bundle b;
  b.header = concat({"winding"}, index_header());
  bool all_match = true;
  for (int k = 0; k < 2 * W + 1; ++k) {
    const int w = k - W;
    const IndexReport& r = reports[k];
    json j = to_json(r);
    j["winding"] = w;
    b.results.push_back(j);
    b.rows.push_back(concat({num(w)}, index_columns(r)));
    b.plot.emplace_back(w, static_cast<double>(r.numerical_index));
    all_match = all_match && r.numerical_index == -w && (!r.spectral_flow || *r.spectral_flow == -w);
    b.reliable = b.reliable && r.reliable;
  }
  b.summary["index_equals_minus_winding"] = all_match;
  b.passed = all_match;
  return b;
}

Bundle index_odd(const Params& p, const Context& ctx) {
  ModeElement u;
  double base_residual = 0.0;
  if (p.s("model") == "degree-one") {
    CorrectionReport c = degree_one_unitary(p.d("mu"), p.i("radius"), p.i("grid"));
    u = c.element;
    base_residual = c.residual;
  } else {
    u = load_input(p, 1);
  }
  const double th = p.d("theta");
  if (th != 0.0 && u.n < 2) throw ConfigError(p.path("theta") + ": must be 0 for n = 1");
  const SkewMatrix theta = th == 0.0 ? SkewMatrix::zero(u.n) : SkewMatrix::planar(u.n, th);
  if (th != 0.0) u = deform_unitary(u, theta, {p.i("window"), 1e-10, 60});
  const double residual = unitarity_defect(u, theta);
  const cplx local = th == 0.0 ? odd_local_index(u, theta, p.d("local_tol"))
                               : deformed_local_index(u, theta, Parity::odd, p.d("local_tol"));
  std::optional<long> flow;
  double weighted = std::numeric_limits<double>::quiet_NaN();
  if (p.i("flow_cutoff") > 0) {
    FlowReport f = dirac_conjugation_flow(u, theta, make_spec(u.n, p.i("flow_cutoff"), u.m, gammas(u.n)), gammas(u.n),
                                          p.i("flow_steps"));
    flow = f.flow;
    weighted = f.weighted;
  }
  IndexOptions io;
  io.tol = p.d("tol");
  io.recheck = false;
  const std::vector<int> cutoffs = p.il("cutoffs");
  const auto reports = parallel_map<IndexReport>(static_cast<int>(cutoffs.size()), ctx.jobs, [&](int k) {
    IndexReport r =
        numerical_index(toeplitz_compress(u, theta, make_spec(u.n, cutoffs[k], u.m, gammas(u.n)), gammas(u.n)), io);
    r.label = "toeplitz";
    r.local_value = local;
    r.spectral_flow = flow;
    return r;
  });
  Bundle b;
  b.header = index_header();
  const long target = std::lround(local.real());
  bool agree = true;
  for (const auto& r : reports) {
    b.results.push_back(to_json(r));
    b.rows.push_back(index_columns(r));
    agree = agree && r.numerical_index == reports.front().numerical_index;
    b.reliable = b.reliable && r.reliable;
  }
  b.reliable = b.reliable && agree && residual < 1e-8;
  b.summary["n"] = u.n;
  b.summary["support_radius"] = u.support_radius();
  b.summary["unitarity_residual"] = residual;
  b.summary["construction_residual"] = base_residual;
  b.summary["local_value"] = complex_json(local);
  b.summary["local_distance_to_integer"] = std::abs(local - cplx(static_cast<double>(target), 0.0));
  b.summary["cutoffs_agree"] = agree;
  b.summary["spectral_flow_weight"] = std::isnan(weighted) ? json(nullptr) : json(weighted);
  b.passed = agree && reports.front().numerical_index == target && (!flow || *flow == target);
  return b;
}

Bundle index_even(const Params& p, const Context& ctx) {
  ModeElement e;
  double base_residual = 0.0;
  if (p.s("model") == "clutching") {
    CorrectionReport c = clutching_projection(p.d("mass"), p.i("radius"), p.i("grid"));
    e = c.element;
    base_residual = c.residual;
  } else {
    e = load_input(p, 0);
  }
  const SkewMatrix theta = SkewMatrix::zero(e.n);
  const cplx local = even_local_index(e, theta, p.d("local_tol"));
  IndexOptions io;
  io.tol = p.d("tol");
  io.recheck = false;
  const std::vector<int> cutoffs = p.il("cutoffs");
  const auto reports = parallel_map<IndexReport>(static_cast<int>(cutoffs.size()), ctx.jobs, [&](int k) {
    IndexReport r = numerical_index(even_compress(e, theta, make_spec(e.n, cutoffs[k], e.m, gammas(e.n), true), gammas(e.n)), io);
    r.label = "even";
    r.local_value = local;
    return r;
  });
  Bundle b;
  b.header = index_header();
  const long target = std::lround(local.real());
  bool agree = true;
  for (const auto& r : reports) {
    b.results.push_back(to_json(r));
    b.rows.push_back(index_columns(r));
    agree = agree && r.numerical_index == reports.front().numerical_index;
    b.reliable = b.reliable && r.reliable;
  }
  if (p.i("chern_cutoff") > 0)
    b.summary["chern_pairing"] =
        complex_json(chern_pairing_even(e, theta, make_spec(e.n, p.i("chern_cutoff"), e.m, gammas(e.n), true), gammas(e.n)));
  b.reliable = b.reliable && agree;
  b.summary["n"] = e.n;
  b.summary["support_radius"] = e.support_radius();
  b.summary["projection_residual"] = idempotency_defect(e, theta);
  b.summary["construction_residual"] = base_residual;
  b.summary["local_value"] = complex_json(local);
  b.summary["local_distance_to_integer"] = std::abs(local - cplx(static_cast<double>(target), 0.0));
  b.summary["cutoffs_agree"] = agree;
  b.passed = agree && reports.front().numerical_index == target;
  return b;
}

Bundle deform_sweep(const Params& p, const Context& ctx) {
  const ModeElement e = clutching_projection(p.d("mass"), p.i("radius"), p.i("grid")).element;
  SweepOptions o;
  o.window = p.i("window");
  o.tol = p.d("tol");
  o.index_radius = p.i("index_radius");
  o.cutoff = p.i("cutoff");
  o.chern = p.b("chern");
  o.chern_cutoff = p.i("chern_cutoff");
  const std::vector<double> thetas = p.dl("theta");
  const auto entries = parallel_map<DeformedEntry>(static_cast<int>(thetas.size()), ctx.jobs, [&](int k) {
    return deformed_index_experiment(e, {thetas[k]}, o).entries.front();
  });
  Bundle b;
  b.header = concat({"theta", "base_theta", "units", "projection_residual", "trace"}, index_header());
  bool invariant = true;
  const long ref = entries.front().report.numerical_index;
  for (const auto& en : entries) {
    json j = to_json(en.report);
    j["theta"] = en.theta;
    j["base_theta"] = en.base_theta;
    j["units"] = en.units;
    j["projection_residual"] = en.residual;
    j["trace"] = en.trace;
    b.results.push_back(j);
    b.rows.push_back(concat({num(en.theta), num(en.base_theta), num(en.units), num(en.residual), num(en.trace)},
                            index_columns(en.report)));
    b.plot.emplace_back(en.theta, static_cast<double>(en.report.numerical_index));
    invariant = invariant && en.report.numerical_index == ref && std::lround(en.report.local_value.real()) == ref;
    b.reliable = b.reliable && en.report.reliable;
  }
  b.summary["invariant"] = invariant;
  b.summary["index"] = ref;
  b.passed = invariant;
  return b;
}

Bundle spectral_flow_cmd(const Params& p, const Context&) {
  ModeElement u;
  const std::string model = p.s("model");
  if (model == "winding")
    u = winding_unitary(p.i("winding"));
  else if (model == "degree-one")
    u = degree_one_unitary().element;
  else
    u = load_input(p, 1);
  const int n = u.n;
  const int cutoff = p.i("cutoff") > 0 ? p.i("cutoff") : (n == 1 ? 16 : std::max(4, u.support_radius()));
  const int index_cutoff = p.i("index_cutoff") > 0 ? p.i("index_cutoff") : (n == 1 ? 128 : cutoff + 1);
  if (cutoff < u.support_radius()) throw ConfigError(p.path("cutoff") + ": smaller than the support radius of the unitary");
  const SkewMatrix theta = SkewMatrix::zero(n);
  FlowReport f = dirac_conjugation_flow(u, theta, make_spec(n, cutoff, u.m, gammas(n)), gammas(n), p.i("steps"));
  IndexOptions io;
  io.recheck = false;
  IndexReport r = numerical_index(toeplitz_compress(u, theta, make_spec(n, index_cutoff, u.m, gammas(n)), gammas(n)), io);
  r.label = "flow-vs-index";
  r.spectral_flow = f.flow;
  Bundle b;
  b.header = {"n", "flow_cutoff", "steps", "flow", "weighted", "crossings", "intervals", "index_cutoff", "index"};
  b.rows.push_back({num(n), num(cutoff), num(p.i("steps")), num(f.flow), num(f.weighted), num(f.crossings), num(f.intervals),
                    num(index_cutoff), num(r.numerical_index)});
  json j = to_json(r);
  j["flow_cutoff"] = cutoff;
  j["weighted"] = f.weighted;
  j["crossings"] = f.crossings;
  j["intervals"] = f.intervals;
  j["refinements"] = f.refinements;
  b.results.push_back(j);
  b.reliable = r.reliable && std::abs(f.weighted - static_cast<double>(f.flow)) < 0.5;
  b.summary["flow_equals_index"] = f.flow == r.numerical_index;
  b.passed = f.flow == r.numerical_index;
  return b;
}

Bundle star_selftest(const Params& p, const Context& ctx) {
  const int count = p.i("count"), m = p.i("m"), radius = p.i("radius");
  const double tol = p.d("tol");
  const std::vector<int> dims = p.il("n");
  struct Row {
    double assoc = 0, trace_prop = 0, tracial = 0, adjoint_rev = 0, leibniz = 0;
  };
  const auto rows = parallel_map<Row>(static_cast<int>(dims.size()), ctx.jobs, [&](int k) {
    const int n = dims[k];
    std::mt19937_64 rng(ctx.seed * 1000003ULL + static_cast<unsigned long>(n));
    std::uniform_real_distribution<double> th(-1.0, 1.0);
    Row r;
    auto dist = [](const ModeElement& a, const ModeElement& b) { return coeff_max(absorb_unit(a - b)); };
    auto unit_norm = [](ModeElement a) { return (1.0 / coeff_norm(a)) * a; };
    for (int c = 0; c < count; ++c) {
      SkewMatrix t(n);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) t.set(i, j, th(rng));
      const ModeElement a = unit_norm(random_element(n, m, radius, rng)), bb = unit_norm(random_element(n, m, radius, rng)),
                        cc = unit_norm(random_element(n, m, radius, rng));
      const ModeElement ab = star_multiply(a, bb, t);
      r.assoc = std::max(r.assoc, dist(star_multiply(ab, cc, t), star_multiply(a, star_multiply(bb, cc, t), t)));
      r.trace_prop = std::max(r.trace_prop, std::abs(trace(ab) - trace(star_multiply(a, bb, SkewMatrix::zero(n)))));
      r.tracial = std::max(r.tracial, std::abs(trace(ab) - trace(star_multiply(bb, a, t))));
      r.adjoint_rev = std::max(r.adjoint_rev, dist(adjoint(ab), star_multiply(adjoint(bb), adjoint(a), t)));
      for (int d = 1; d <= n; ++d)
        r.leibniz = std::max(r.leibniz, dist(derivation(ab, d), star_multiply(derivation(a, d), bb, t) + star_multiply(a, derivation(bb, d), t)));
    }
    return r;
  });
  Bundle b;
  b.header = {"n", "count", "associativity", "trace_property", "tracial_symmetry", "adjoint_reversal", "leibniz", "pass"};
  for (size_t k = 0; k < dims.size(); ++k) {
    const Row& r = rows[k];
    const double worst = std::max({r.assoc, r.trace_prop, r.tracial, r.adjoint_rev, r.leibniz});
    const bool pass = worst < tol;
    b.rows.push_back({num(dims[k]), num(count), num(r.assoc), num(r.trace_prop), num(r.tracial), num(r.adjoint_rev),
                      num(r.leibniz), num(pass)});
    b.results.push_back({{"n", dims[k]},
                         {"count", count},
                         {"associativity", r.assoc},
                         {"trace_property", r.trace_prop},
                         {"tracial_symmetry", r.tracial},
                         {"adjoint_reversal", r.adjoint_rev},
                         {"leibniz", r.leibniz},
                         {"pass", pass}});
    b.passed = b.passed && pass;
  }
  b.summary["tolerance"] = tol;
  return b;
}

Bundle moyal_selftest(const Params& p, const Context& ctx) {
  const GridSpec g{2, p.d("half_width"), p.i("points")};
  if (g.points & (g.points - 1)) throw ConfigError(p.path("points") + ": must be a power of two");
  const SkewMatrix t = SkewMatrix::planar(2, p.d("theta"));
  auto gauss = [](double cx, double cy, double w, double tilt) {
    return [=](const std::vector<double>& x) {
      return std::exp(-w * ((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy))) * cplx(1.0, tilt * x[1]);
    };
  };
  const auto f = gauss(0.3, 0.0, 0.7, 0.0), h = gauss(0.0, -0.2, 0.5, 0.4), k = gauss(-0.2, 0.1, 0.6, 0.0);
  const GridSamples fs = sample(g, f), hs = sample(g, h), ks = sample(g, k);
  const GridSamples fh = moyal_multiply(g, fs, hs, t);
  // oracle points drawn from the central quarter of the grid
  std::mt19937_64 rng(ctx.seed);
  std::uniform_int_distribution<int> pick(g.points * 3 / 8, g.points * 5 / 8);
  std::vector<std::vector<double>> pts;
  std::vector<long> flat;
  for (int q = 0; q < p.i("oracle_points"); ++q) {
    const int a = pick(rng), c = pick(rng);
    pts.push_back({g.coord(a), g.coord(c)});
    flat.push_back(static_cast<long>(a) * g.points + c);
  }
  const std::vector<OracleValue> o = oracle_multiply(f, h, 2, t, pts);
  Bundle b;
  b.header = {"check", "x", "y", "value_re", "value_im", "reference_re", "reference_im", "error"};
  double worst = 0.0;
  for (size_t q = 0; q < pts.size(); ++q) {
    const cplx v = fh(flat[q]);
    const double err = std::abs(v - o[q].value);
    worst = std::max(worst, err);
    b.rows.push_back({"oracle", num(pts[q][0]), num(pts[q][1]), num(v.real()), num(v.imag()), num(o[q].value.real()),
                      num(o[q].value.imag()), num(err)});
    b.results.push_back({{"check", "oracle"}, {"point", pts[q]}, {"value", complex_json(v)}, {"reference", complex_json(o[q].value)},
                         {"spread", std::abs(o[q].spread)}, {"error", err}});
  }
  const double assoc =
      (moyal_multiply(g, fh, ks, t, 1e-6) - moyal_multiply(g, fs, moyal_multiply(g, hs, ks, t), t, 1e-6)).cwiseAbs().maxCoeff();
  const double conj =
      (fh.conjugate() - moyal_multiply(g, hs.conjugate(), fs.conjugate(), t)).cwiseAbs().maxCoeff();
  b.rows.push_back({"associativity", "", "", "", "", "", "", num(assoc)});
  b.rows.push_back({"conjugation", "", "", "", "", "", "", num(conj)});
  b.results.push_back({{"check", "associativity"}, {"error", assoc}});
  b.results.push_back({{"check", "conjugation"}, {"error", conj}});
  const double tol = p.d("tol");
  b.summary["oracle_max_error"] = worst;
  b.summary["tolerance"] = tol;
  b.passed = worst < tol && assoc < 1e-10 && conj < 1e-10;
  return b;
}

Bundle bott_check(const Params& p, const Context&) {
  const int n = p.i("n");
  const GridSpec g{n, p.d("half_width"), p.i("points")};
  if (g.points & (g.points - 1)) throw ConfigError(p.path("points") + ": must be a power of two");
  const double th = p.d("theta");
  if (th != 0.0 && n < 2) throw ConfigError(p.path("theta") + ": must be 0 for n = 1");
  const bool dense = p.b("dense") || th != 0.0;
  if (dense && g.total() > 1024) throw ConfigError(p.path("points") + ": dense path needs points^n <= 1024");
  BottReport r = dense ? bott_normalization_dense(g, th == 0.0 ? SkewMatrix::zero(n) : SkewMatrix::planar(n, th), p.d("tol"))
                       : bott_normalization(n, g, p.d("tol"));
  r.index.label = dense ? "bott-dense" : "bott";
  Bundle b;
  b.header = concat({"n", "points", "half_width", "theta", "gaussian_overlap", "lowest_nonzero"}, index_header());
  b.rows.push_back(concat({num(n), num(g.points), num(g.L), num(th), num(r.gaussian_overlap), num(r.lowest_nonzero)},
                          index_columns(r.index)));
  json j = to_json(r.index);
  j["gaussian_overlap"] = r.gaussian_overlap;
  j["lowest_nonzero"] = r.lowest_nonzero;
  j["clifford_residual"] = std::isnan(r.clifford_residual) ? json(nullptr) : json(r.clifford_residual);
  b.results.push_back(j);
  b.reliable = r.index.reliable;
  b.passed = r.index.numerical_index == 1 && r.index.kernel_dim == 1 && r.gaussian_overlap >= 0.999;
  b.summary["index"] = r.index.numerical_index;
  return b;
}

Bundle hall_flow(const Params& p, const Context& ctx) {
  const std::string model = p.s("model");
  const bool suspension = model == "suspension";
  ModeElement u;
  if (model == "winding") u = winding_unitary(p.i("winding"));
  else if (model == "degree-one") u = degree_one_unitary().element;
  const int n = model == "winding" ? 1 : 3;
  const std::vector<double> thetas = p.dl("theta");
  if (n == 1)
    for (size_t k = 0; k < thetas.size(); ++k)
      if (thetas[k] != 0.0) throw ConfigError(p.path("theta") + "[" + std::to_string(k) + "]: must be 0 for the winding model");
  const ModeElement e = suspension ? clutching_projection(p.d("mass")).element : ModeElement();
  const double chain_tol = p.d("chain_tol") > 0.0 ? p.d("chain_tol") : (n == 1 ? 1e-3 : suspension ? 1e-2 : 0.5);
  const auto out = parallel_map<HallDisplay>(static_cast<int>(thetas.size()), ctx.jobs, [&](int k) {
    const SkewMatrix t = thetas[k] == 0.0 ? SkewMatrix::zero(n) : SkewMatrix::planar(n, thetas[k]);
    if (!suspension) return hall_flow_display(u, t, thetas[k], p.i("window"), p.i("flow_cutoff"), chain_tol);
    const SkewMatrix t2 = thetas[k] == 0.0 ? SkewMatrix::zero(2) : SkewMatrix::planar(2, thetas[k]);
    const ClassDeformation cd = deform_projection_class(e, t2, 1, {p.i("class_window"), 1e-10, 60});
    if (!cd.report.converged) throw std::domain_error("hall-flow: projection class did not converge");
    const ModeElement v = suspension_unitary(truncate(cd.report.element, p.i("radius")));
    return hall_flow_display(v, t, thetas[k], p.i("window"), p.i("flow_cutoff"), chain_tol, false);
  });
  Bundle b;
  b.header = {"theta", "sf_re", "sf_im", "displayed_re", "displayed_im", "product_re", "product_im", "unitarity_residual", "flow"};
  std::optional<long> ref;
  bool invariant = true;
  for (const auto& h : out) {
    b.rows.push_back({num(h.theta), num(h.trace_form.real()), num(h.trace_form.imag()), num(h.literal_trace_form.real()),
                      num(h.literal_trace_form.imag()), num(h.product_form.real()), num(h.product_form.imag()),
                      num(h.residual), h.flow ? num(*h.flow) : ""});
    b.results.push_back({{"theta", h.theta},
                         {"sf", complex_json(h.trace_form)},
                         {"displayed", complex_json(h.literal_trace_form)},
                         {"product_form", complex_json(h.product_form)},
                         {"unitarity_residual", h.residual},
                         {"flow", h.flow ? json(*h.flow) : json(nullptr)}});
    b.plot.emplace_back(h.theta, h.trace_form.real());
    const long v = std::lround(h.trace_form.real());
    if (!ref) ref = v;
    invariant = invariant && v == *ref && (!h.flow || *h.flow == v);
    b.reliable = b.reliable && h.converged && std::abs(h.trace_form - cplx(static_cast<double>(v), 0.0)) < 1e-3;
  }
  b.summary["invariant"] = invariant;
  b.summary["sf"] = ref ? json(*ref) : json(nullptr);
  b.passed = invariant;
  return b;
}

// ---------------------------------------------------------------- registry

struct Command {
  std::string name;
  std::string help;
  std::vector<Field> fields;
  Bundle (*run)(const Params&, const Context&);
};

const double kBig = 1e9;

std::vector<Command> commands() {
  const std::vector<std::string> odd_models = {"degree-one", "file"};
  return {
      {"gohberg-krein",
       "winding table on the circle",
       {{"max_winding", Kind::Int, 3, "windings -W..W", 0, 20},
        {"cutoff", Kind::Int, 128, "mode cutoff", 2, 4096},
        {"tol", Kind::Double, 1e-5, "relative singular-value threshold", 0, 1},
        {"flow", Kind::Bool, true, "also compute the spectral flow"},
        {"flow_cutoff", Kind::Int, 0, "flow cutoff (0: same as cutoff)", 0, 4096},
        {"flow_steps", Kind::Int, 16, "flow path steps", 1, 1024}},
       gohberg_krein},
      {"index-odd",
       "odd index pipeline (Toeplitz compression, local formula, optional flow)",
       {{"model", Kind::String, "degree-one", "degree-one or file", -kBig, kBig, odd_models},
        {"input", Kind::String, "", "element file when model is file"},
        {"mu", Kind::Double, 2.4, "degree-one model parameter", 0, kBig},
        {"radius", Kind::Int, 4, "support radius of the model", 1, 64},
        {"grid", Kind::Int, 32, "sampling grid of the model", 4, 512},
        {"cutoffs", Kind::IntList, json::array({5, 6}), "compression cutoffs", 1, 512},
        {"theta", Kind::Double, 0.0, "planar deformation parameter", -kBig, kBig},
        {"window", Kind::Int, 8, "support window of the deformed unitary", 1, 64},
        {"local_tol", Kind::Double, 0.5, "coefficient cutoff tolerance of the local formula", 0, kBig},
        {"tol", Kind::Double, 1e-2, "relative singular-value threshold", 0, 1},
        {"flow_cutoff", Kind::Int, 0, "spectral-flow cutoff (0: skip)", 0, 512},
        {"flow_steps", Kind::Int, 16, "flow path steps", 1, 1024}},
       index_odd},
      {"index-even",
       "even index pipeline in the plane",
       {{"model", Kind::String, "clutching", "clutching or file", -kBig, kBig, {"clutching", "file"}},
        {"input", Kind::String, "", "element file when model is file"},
        {"mass", Kind::Double, 1.2, "clutching mass", 0, kBig},
        {"radius", Kind::Int, 8, "support radius of the model", 1, 64},
        {"grid", Kind::Int, 64, "sampling grid of the model", 4, 512},
        {"cutoffs", Kind::IntList, json::array({24}), "compression cutoffs", 1, 512},
        {"local_tol", Kind::Double, 1e-2, "coefficient cutoff tolerance of the local formula", 0, kBig},
        {"tol", Kind::Double, 1e-5, "relative singular-value threshold", 0, 1},
        {"chern_cutoff", Kind::Int, 0, "cutoff of the Chern pairing (0: skip)", 0, 64}},
       index_even},
      {"deform-sweep",
       "index of the deformed projection class across theta",
       {{"theta", Kind::DoubleList, json::array({0.0, 0.3, 0.7071}), "deformation parameters", -kBig, kBig},
        {"mass", Kind::Double, 1.2, "clutching mass", 0, kBig},
        {"radius", Kind::Int, 8, "support radius of the model", 1, 64},
        {"grid", Kind::Int, 64, "sampling grid of the model", 4, 512},
        {"window", Kind::Int, 32, "support window of the corrected projection", 1, 128},
        {"tol", Kind::Double, 1e-10, "purification target", 0, 1},
        {"index_radius", Kind::Int, 12, "support kept for the compression", 1, 128},
        {"cutoff", Kind::Int, 16, "compression cutoff", 1, 512},
        {"chern", Kind::Bool, false, "also compute the Chern pairing"},
        {"chern_cutoff", Kind::Int, 8, "cutoff of the Chern pairing", 1, 64}},
       deform_sweep},
      {"spectral-flow",
       "spectral flow from D to u* D u against the index",
       {{"model", Kind::String, "winding", "winding, degree-one or file", -kBig, kBig, {"winding", "degree-one", "file"}},
        {"input", Kind::String, "", "element file when model is file"},
        {"winding", Kind::Int, 1, "winding number", -20, 20},
        {"cutoff", Kind::Int, 0, "flow cutoff (0: automatic)", 0, 512},
        {"index_cutoff", Kind::Int, 0, "index cutoff (0: automatic)", 0, 4096},
        {"steps", Kind::Int, 16, "path steps", 1, 1024}},
       spectral_flow_cmd},
      {"star-selftest",
       "property suite of the twisted mode product",
       {{"n", Kind::IntList, json::array({2, 3}), "dimensions", 1, 6},
        {"count", Kind::Int, 100, "random elements per dimension", 1, 100000},
        {"m", Kind::Int, 2, "coefficient matrix size", 1, 16},
        {"radius", Kind::Int, 1, "support radius of random elements", 0, 8},
        {"tol", Kind::Double, 1e-12, "pass threshold", 0, 1}},
       star_selftest},
      {"moyal-selftest",
       "grid Moyal product against the oscillatory integral",
       {{"points", Kind::Int, 64, "grid points per axis", 8, 1024},
        {"half_width", Kind::Double, 8.0, "grid half-width", 0, kBig},
        {"theta", Kind::Double, 0.3, "planar deformation parameter", -kBig, kBig},
        {"oracle_points", Kind::Int, 5, "number of oracle evaluations", 1, 1000},
        {"tol", Kind::Double, 1e-6, "pass threshold", 0, 1}},
       moyal_selftest},
      {"bott-check",
       "oscillator Bott normalization",
       {{"n", Kind::Int, 1, "dimension", 1, 2},
        {"points", Kind::Int, 256, "grid points per axis", 4, 4096},
        {"half_width", Kind::Double, 8.0, "grid half-width", 0, kBig},
        {"theta", Kind::Double, 0.0, "planar deformation (dense path)", -kBig, kBig},
        {"dense", Kind::Bool, false, "force the dense operator path"},
        {"tol", Kind::Double, 1e-4, "kernel threshold", 0, 1}},
       bott_check},
      {"hall-flow",
       "spectral-flow displays and their deformed versions on torus models",
       {{"model", Kind::String, "degree-one", "winding, degree-one or suspension", -kBig, kBig,
         {"winding", "degree-one", "suspension"}},
        {"winding", Kind::Int, 1, "winding number (winding model)", -20, 20},
        {"theta", Kind::DoubleList, json::array({0.0}), "deformation parameters", -kBig, kBig},
        {"window", Kind::Int, 8, "support window of the polar correction (degree-one model)", 1, 64},
        {"mass", Kind::Double, 1.2, "clutching mass (suspension model)", 0, kBig},
        {"class_window", Kind::Int, 32, "support window of the deformed projection (suspension model)", 1, 128},
        {"radius", Kind::Int, 12, "truncation radius of the suspended projection", 1, 64},
        {"chain_tol", Kind::Double, 0.0, "coefficient tolerance of the chain (0: per model)", 0, kBig},
        {"flow_cutoff", Kind::Int, 0, "numerical flow cutoff (0: skip)", 0, 512}},
       hall_flow},
  };
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw ConfigError("--config: cannot read " + path);
  json c;
  try {
    c = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!c.is_object()) throw ConfigError("config: expected an object");
  if (!c.contains("schema_version")) throw ConfigError("config.schema_version: missing");
  if (!c["schema_version"].is_number_integer() || c["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError("config.schema_version: expected " + std::to_string(kSchemaVersion));
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncindex: index computations on truncated mode models"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = "ncindex-out";
  int jobs = 1;
  bool strict = false;
  unsigned long seed = 1;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads for sweeps")->check(CLI::Range(1, 256));
  app.add_flag("--strict", strict, "nonzero exit when any report is unreliable");
  app.add_option("--seed", seed, "random seed");

  const std::vector<Command> cmds = commands();
  std::vector<std::pair<CLI::App*, Params>> subs;
  subs.reserve(cmds.size());
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    subs.emplace_back(sub, Params(c.name, c.fields));
  }
  for (auto& [sub, params] : subs) params.attach(sub);
  CLI11_PARSE(app, argc, argv);

  for (size_t k = 0; k < cmds.size(); ++k) {
    if (!subs[k].first->parsed()) continue;
    Params& params = subs[k].second;
    try {
      const json config = load_config(config_path);
      for (const auto& [key, v] : config.items()) {
        if (key == "schema_version" || key == "seed") continue;
        if (std::none_of(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == key; }))
          throw ConfigError("config." + key + ": unknown field");
      }
      if (config.contains("seed")) {
        if (!config["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a nonnegative integer");
        if (app.get_option("--seed")->count() == 0) seed = config["seed"].get<unsigned long>();
      }
      params.resolve(config);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Bundle b;
    try {
      b = cmds[k].run(params, Context{jobs, seed});
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << cmds[k].name << ": " << e.what() << "\n";
      return 3;
    }
    const long ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    json effective = {{"schema_version", kSchemaVersion}, {"seed", seed}, {cmds[k].name, params.values()}};
    write_bundle(out_dir, cmds[k].name, effective, seed, b, ms);
    std::cout << cmds[k].name << ": " << (b.passed ? "passed" : "failed") << (b.reliable ? "" : " (unreliable)") << ", "
              << b.rows.size() << " rows -> " << out_dir << "\n";
    if (strict && (!b.reliable || !b.passed)) return 1;
    return 0;
  }
  return 0;
}
