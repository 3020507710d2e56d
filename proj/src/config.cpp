#include "contdyn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "contdyn/error.hpp"

namespace contdyn {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"domain", {"mode", "dimension", "window_min", "window_max", "torus_side"}},
      {"kernel", {"variant", "rate", "rate_lo", "rate_hi", "profile", "mass", "sigma", "radius", "h_kill"}},
      {"dynamics",
       {"times", "mode", "z", "buffer", "background", "start", "start_z", "start_kappa",
        "start_p2", "start_sigma", "start_points", "start_file", "resample_start"}},
      {"observables",
       {"samples", "functional", "kappa", "h", "order", "bins", "alpha", "m", "epsilon", "delta",
        "target_tol", "r_max", "theta_file", "exit_paths", "exit_radius", "exit_step", "tol"}},
      {"scaling",
       {"measure", "z", "kappa", "p2", "sigma_c", "eps", "samples", "common_random_numbers"}},
      {"rng", {"seed"}},
      {"output", {"dir", "events"}},
  };
  return s;
}

bool is_phi_key(const std::string& k) {
  if (k.size() < 4 || k.compare(0, 3, "phi") != 0) return false;
  return std::all_of(k.begin() + 3, k.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> read_point_file(const ExperimentConfig& cfg, const std::string& section,
                                    const std::string& key, std::size_t d) {
  std::filesystem::path file(cfg.str(section, key));
  if (file.is_relative() && !cfg.source().empty() && cfg.source().front() != '<')
    file = std::filesystem::path(cfg.source()).parent_path() / file;
  const std::string path = file.string();
  std::ifstream in(path);
  if (!in) cfg.fail(section, key, "cannot open '" + path + "'");
  std::vector<double> coords;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto parts = split(line, ", \t");
    if (parts.size() != d)
      cfg.fail(section, key, path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(d) + " coordinates");
    for (const auto& p : parts) {
      const auto v = parse_double(p);
      if (!v) cfg.fail(section, key, path + ":" + std::to_string(lineno) + ": bad number '" + p + "'");
      coords.push_back(*v);
    }
  }
  return coords;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, std::string key,
                         const std::string& msg)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         ": " + (key.empty() ? std::string() : "'" + key + "': ") + msg),
      line_(line),
      key_(std::move(key)) {}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  ConfigSection* cur = nullptr;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, lineno, "", "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!schema().count(name)) throw ConfigError(source, lineno, name, "unknown section");
      for (const auto& s : cfg.sections_)
        if (s.name == name) throw ConfigError(source, lineno, name, "section repeated");
      cfg.sections_.push_back(ConfigSection{name, lineno, {}});
      cur = &cfg.sections_.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "", "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, lineno, "", "empty key");
    if (!cur) throw ConfigError(source, lineno, key, "key outside of any section");
    const auto& allowed = schema().at(cur->name);
    if (!allowed.count(key) && !(cur->name == "observables" && is_phi_key(key)))
      throw ConfigError(source, lineno, key, "unknown key in [" + cur->name + "]");
    for (const auto& e : cur->entries)
      if (e.key == key) throw ConfigError(source, lineno, key, "duplicate key");
    if (value.empty()) throw ConfigError(source, lineno, key, "missing value");
    cur->entries.push_back(ConfigEntry{key, value, lineno});
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "", "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string ExperimentConfig::emit() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    if (i) os << '\n';
    os << '[' << sections_[i].name << "]\n";
    for (const auto& e : sections_[i].entries) os << e.key << " = " << e.value << '\n';
  }
  return os.str();
}

const ConfigEntry* ExperimentConfig::find(const std::string& section, const std::string& key) const {
  for (const auto& s : sections_)
    if (s.name == section)
      for (const auto& e : s.entries)
        if (e.key == key) return &e;
  return nullptr;
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

void ExperimentConfig::set(const std::string& section, const std::string& key,
                           const std::string& value) {
  if (!schema().count(section)) throw ConfigError(source_, 0, section, "unknown section");
  for (auto& s : sections_) {
    if (s.name != section) continue;
    for (auto& e : s.entries)
      if (e.key == key) {
        e.value = value;
        return;
      }
    s.entries.push_back(ConfigEntry{key, value, 0});
    return;
  }
  sections_.push_back(ConfigSection{section, 0, {ConfigEntry{key, value, 0}}});
}

void ExperimentConfig::fail(const std::string& section, const std::string& key,
                            const std::string& msg) const {
  const ConfigEntry* e = find(section, key);
  int line = e ? e->line : 0;
  if (!e)
    for (const auto& s : sections_)
      if (s.name == section) line = s.line;
  throw ConfigError(source_, line, section + "." + key, msg);
}

std::string ExperimentConfig::str(const std::string& section, const std::string& key,
                                  std::optional<std::string> fallback) const {
  if (const ConfigEntry* e = find(section, key)) return e->value;
  if (fallback) return *fallback;
  fail(section, key, "required key is missing");
}

double ExperimentConfig::number(const std::string& section, const std::string& key,
                                std::optional<double> fallback) const {
  const ConfigEntry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "required key is missing");
  }
  const auto v = parse_double(e->value);
  if (!v || !std::isfinite(*v)) fail(section, key, "expected a finite number, got '" + e->value + "'");
  return *v;
}

std::uint64_t ExperimentConfig::integer(const std::string& section, const std::string& key,
                                        std::optional<std::uint64_t> fallback) const {
  const ConfigEntry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "required key is missing");
  }
  const std::string& v = e->value;
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
    fail(section, key, "expected a nonnegative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    fail(section, key, "integer out of range");
  }
}

bool ExperimentConfig::flag(const std::string& section, const std::string& key, bool fallback) const {
  const ConfigEntry* e = find(section, key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
  if (e->value == "false" || e->value == "no" || e->value == "0") return false;
  fail(section, key, "expected true or false, got '" + e->value + "'");
}

std::vector<double> ExperimentConfig::numbers(const std::string& section, const std::string& key,
                                              std::optional<std::vector<double>> fallback) const {
  const ConfigEntry* e = find(section, key);
  if (!e) {
    if (fallback) return *fallback;
    fail(section, key, "required key is missing");
  }
  std::vector<double> out;
  for (const auto& p : split(e->value, ", \t")) {
    const auto v = parse_double(p);
    if (!v || !std::isfinite(*v)) fail(section, key, "bad number '" + p + "' in list");
    out.push_back(*v);
  }
  if (out.empty()) fail(section, key, "empty list");
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  if (a.sections_.size() != b.sections_.size()) return false;
  for (std::size_t i = 0; i < a.sections_.size(); ++i) {
    const auto& x = a.sections_[i];
    const auto& y = b.sections_[i];
    if (x.name != y.name || x.entries.size() != y.entries.size()) return false;
    for (std::size_t j = 0; j < x.entries.size(); ++j)
      if (x.entries[j].key != y.entries[j].key || x.entries[j].value != y.entries[j].value)
        return false;
  }
  return true;
}

DomainPtr build_domain(const ExperimentConfig& cfg) {
  const std::string mode = cfg.str("domain", "mode", "full_space");
  const std::size_t d = cfg.integer("domain", "dimension", 1);
  if (d < 1 || d > 3) cfg.fail("domain", "dimension", "dimension must be 1, 2 or 3");
  if (mode == "torus") {
    const double side = cfg.number("domain", "torus_side");
    if (!(side > 0.0)) cfg.fail("domain", "torus_side", "must be > 0");
    return make_domain(Domain::torus(d, side));
  }
  if (mode != "full_space") cfg.fail("domain", "mode", "expected full_space or torus, got '" + mode + "'");
  const auto lo = cfg.numbers("domain", "window_min");
  const auto hi = cfg.numbers("domain", "window_max");
  if (lo.size() != d) cfg.fail("domain", "window_min", "needs one value per dimension");
  if (hi.size() != d) cfg.fail("domain", "window_max", "needs one value per dimension");
  for (std::size_t i = 0; i < d; ++i)
    if (!(hi[i] > lo[i])) cfg.fail("domain", "window_max", "window must have hi > lo");
  return make_domain(Domain::full_space(Box{lo, hi}));
}

KernelSpec build_kernel(const ExperimentConfig& cfg, std::size_t d) {
  const std::string type = cfg.str("kernel", "variant");
  auto rate = [&] {
    const double r = cfg.number("kernel", "rate");
    if (!(r >= 0.0)) cfg.fail("kernel", "rate", "must be >= 0");
    if (cfg.has("kernel", "rate_lo") || cfg.has("kernel", "rate_hi")) {
      const auto lo = cfg.numbers("kernel", "rate_lo");
      const auto hi = cfg.numbers("kernel", "rate_hi");
      if (lo.size() != d || hi.size() != d) cfg.fail("kernel", "rate_lo", "needs one value per dimension");
      for (std::size_t i = 0; i < d; ++i)
        if (!(hi[i] > lo[i])) cfg.fail("kernel", "rate_hi", "box must have hi > lo");
      return RateFunction::box_indicator(r, Box{lo, hi});
    }
    return RateFunction::constant(r);
  };
  if (type == "brownian") return KernelSpec::brownian();
  if (type == "death" || type == "glauber") return KernelSpec::death(rate());
  if (type == "killed_brownian")
    return KernelSpec::killed_brownian(rate(), cfg.number("kernel", "h_kill", 0.0));
  if (type == "kawasaki") {
    const std::string profile = cfg.str("kernel", "profile", "gaussian");
    const double mass = cfg.number("kernel", "mass", 1.0);
    if (!(mass > 0.0)) cfg.fail("kernel", "mass", "must be > 0");
    if (profile == "gaussian") {
      const double sigma = cfg.number("kernel", "sigma", 1.0);
      if (!(sigma > 0.0)) cfg.fail("kernel", "sigma", "must be > 0");
      return KernelSpec::kawasaki(JumpProfile::gaussian(d, mass, sigma));
    }
    if (profile == "bump") {
      const double radius = cfg.number("kernel", "radius", 1.0);
      if (!(radius > 0.0)) cfg.fail("kernel", "radius", "must be > 0");
      return KernelSpec::kawasaki(JumpProfile::bump(d, mass, radius));
    }
    cfg.fail("kernel", "profile", "expected gaussian or bump, got '" + profile + "'");
  }
  cfg.fail("kernel", "variant",
           "expected brownian, death, kawasaki or killed_brownian, got '" + type + "'");
}

std::vector<TestFunction> build_test_functions(const ExperimentConfig& cfg, std::size_t d,
                                               bool required) {
  std::vector<TestFunction> out;
  for (int i = 1;; ++i) {
    const std::string key = "phi" + std::to_string(i);
    if (!cfg.has("observables", key)) break;
    const auto words = split(cfg.str("observables", key), " \t");
    std::map<std::string, std::string> args;
    for (std::size_t w = 1; w < words.size(); ++w) {
      const auto eq = words[w].find('=');
      if (eq == std::string::npos) cfg.fail("observables", key, "expected name=value, got '" + words[w] + "'");
      args[words[w].substr(0, eq)] = words[w].substr(eq + 1);
    }
    auto arg = [&](const std::string& name) {
      const auto it = args.find(name);
      if (it == args.end()) cfg.fail("observables", key, "missing parameter '" + name + "'");
      std::vector<double> v;
      for (const auto& p : split(it->second, ",")) {
        const auto x = parse_double(p);
        if (!x) cfg.fail("observables", key, "bad number '" + p + "' for '" + name + "'");
        v.push_back(*x);
      }
      return v;
    };
    auto scalar = [&](const std::string& name) {
      const auto v = arg(name);
      if (v.size() != 1) cfg.fail("observables", key, "'" + name + "' takes one number");
      return v[0];
    };
    try {
      if (words.front() == "zero") {
        out.push_back(TestFunction::zero(d));
      } else if (words.front() == "box") {
        const auto lo = arg("lo"), hi = arg("hi");
        if (lo.size() != d || hi.size() != d) cfg.fail("observables", key, "lo/hi need one value per dimension");
        out.push_back(TestFunction::box_indicator(scalar("depth"), Box{lo, hi}));
      } else if (words.front() == "bump") {
        const auto c = arg("center");
        if (c.size() != d) cfg.fail("observables", key, "center needs one value per dimension");
        out.push_back(TestFunction::bump(scalar("depth"), c, scalar("radius")));
      } else {
        cfg.fail("observables", key, "expected zero, box or bump, got '" + words.front() + "'");
      }
    } catch (const InvalidArgument& e) {
      cfg.fail("observables", key, e.what());
    }
  }
  if (required && out.empty()) cfg.fail("observables", "phi1", "at least one test function is required");
  return out;
}

EvolutionPlan build_plan(const ExperimentConfig& cfg, const Domain& domain) {
  EvolutionPlan p;
  p.times = cfg.numbers("dynamics", "times");
  const std::string mode = cfg.str("dynamics", "mode", "conservative");
  if (mode == "immigration") {
    p.mode = EvolutionMode::SubMarkovWithImmigration;
    p.z = cfg.number("dynamics", "z");
  } else if (mode != "conservative") {
    cfg.fail("dynamics", "mode", "expected conservative or immigration, got '" + mode + "'");
  }
  p.boundary = default_boundary(domain);
  if (!domain.is_torus()) {
    const std::string buffer = cfg.str("dynamics", "buffer", "auto");
    if (buffer != "auto") {
      const double w = cfg.number("dynamics", "buffer");
      if (!(w >= 0.0)) cfg.fail("dynamics", "buffer", "must be auto or >= 0");
      p.boundary.width = w;
    }
    if (cfg.has("dynamics", "background")) {
      const double b = cfg.number("dynamics", "background");
      if (!(b >= 0.0)) cfg.fail("dynamics", "background", "must be >= 0");
      p.boundary.background = Intensity::constant(b);
    }
  } else if (cfg.has("dynamics", "buffer") || cfg.has("dynamics", "background")) {
    cfg.fail("dynamics", "buffer", "buffers apply only to full_space domains");
  }
  try {
    p.validate(domain);
  } catch (const InvalidArgument& e) {
    cfg.fail("dynamics", "times", e.what());
  }
  return p;
}

Configuration build_start(const ExperimentConfig& cfg, const DomainPtr& domain, RngStream& rng) {
  const std::string start = cfg.str("dynamics", "start", "poisson");
  const std::size_t d = domain->dim();
  try {
    if (start == "empty") return Configuration(domain);
    if (start == "poisson") {
      const double z = cfg.number("dynamics", "start_z", 1.0);
      if (!(z >= 0.0)) cfg.fail("dynamics", "start_z", "must be >= 0");
      return sample_poisson(domain, Intensity::constant(z), rng);
    }
    if (start == "neyman_scott")
      return StartingMeasure::neyman_scott(cfg.number("dynamics", "start_kappa"),
                                           cfg.number("dynamics", "start_p2"),
                                           cfg.number("dynamics", "start_sigma"))
          .sample(domain, rng);
    if (start == "points") {
      const auto c = cfg.numbers("dynamics", "start_points");
      if (c.size() % d) cfg.fail("dynamics", "start_points", "coordinate count is not a multiple of dim");
      return Configuration(domain, c);
    }
    if (start == "file") return Configuration(domain, read_point_file(cfg, "dynamics", "start_file", d));
  } catch (const InvalidArgument& e) {
    cfg.fail("dynamics", "start", e.what());
  }
  cfg.fail("dynamics", "start", "expected empty, poisson, neyman_scott, points or file, got '" + start + "'");
}

StartingMeasure build_measure(const ExperimentConfig& cfg) {
  const std::string m = cfg.str("scaling", "measure", "poisson");
  try {
    if (m == "poisson") return StartingMeasure::poisson(cfg.number("scaling", "z", 1.0));
    if (m == "neyman_scott")
      return StartingMeasure::neyman_scott(cfg.number("scaling", "kappa", 2.0 / 3.0),
                                           cfg.number("scaling", "p2", 0.5),
                                           cfg.number("scaling", "sigma_c", 0.5));
  } catch (const InvalidArgument& e) {
    cfg.fail("scaling", "measure", e.what());
  }
  cfg.fail("scaling", "measure", "expected poisson or neyman_scott, got '" + m + "'");
}

ScalingExperiment build_scaling(const ExperimentConfig& cfg) {
  ScalingExperiment e = canonical_scaling_experiment(build_measure(cfg));
  if (cfg.has("domain", "mode")) {
    e.domain = build_domain(cfg);
    if (!e.domain->is_torus()) cfg.fail("domain", "mode", "the scaling experiment runs on a torus");
  }
  const std::size_t d = e.domain->dim();
  if (cfg.has("kernel", "variant")) {
    const KernelSpec k = build_kernel(cfg, d);
    if (!k.is_kawasaki()) cfg.fail("kernel", "variant", "the scaling experiment needs a kawasaki profile");
    e.xi = *k.profile();
  } else if (d != 1) {
    e.xi = JumpProfile::gaussian(d, 1.0, 1.0);
  }
  if (cfg.has("dynamics", "times")) e.times = cfg.numbers("dynamics", "times");
  auto phis = build_test_functions(cfg, d, false);
  if (!phis.empty()) e.phis = std::move(phis);
  if (e.phis.size() != e.times.size())
    cfg.fail("observables", "phi1", "one test function per time is required");
  if (cfg.has("scaling", "eps")) e.eps_schedule = cfg.numbers("scaling", "eps");
  e.n_samples = cfg.integer("scaling", "samples", e.n_samples);
  e.common_random_numbers = cfg.flag("scaling", "common_random_numbers", true);
  return e;
}

std::uint64_t config_seed(const ExperimentConfig& cfg) { return cfg.integer("rng", "seed", 1); }

}  // namespace contdyn
