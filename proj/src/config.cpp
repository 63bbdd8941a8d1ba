#include "towerlimits/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace towerlimits {

const std::vector<std::string> kExperimentKinds = {
    "tails", "decay",    "variance", "tower_lift", "flow_lift",
    "billiard", "clt",   "wip",      "lil",        "ps_conditions"};

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has a non-numeric value '" + value + "'");
  }
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  const double x = parse_double(key, value);
  if (!(x > 0.0) || x != std::floor(x) || x > 1e18)
    throw ConfigError("config: key '" + key + "' must be a positive integer");
  return static_cast<std::uint64_t>(x);
}

std::vector<Disk> parse_disks(const std::string& key, const std::string& value) {
  std::vector<Disk> disks;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ';')) {
    part = trim(part);
    if (part.empty()) continue;
    std::stringstream ps(part);
    std::string num;
    std::vector<double> vals;
    while (std::getline(ps, num, ',')) vals.push_back(parse_double(key, trim(num)));
    if (vals.size() != 3)
      throw ConfigError("config: key '" + key + "' expects cx,cy,rho triples separated by ';'");
    disks.push_back({vals[0], vals[1], vals[2]});
  }
  if (disks.empty()) throw ConfigError("config: key '" + key + "' lists no scatterers");
  return disks;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty() || line.front() == ';') continue;  // ';' comments whole lines only
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header at line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      static const std::vector<std::string> sections = {"experiment", "system",  "observable",
                                                        "billiard",   "budget",  "accept",
                                                        "run"};
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError("config: unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value at line " + std::to_string(line_no));
    cfg.echo[section + "." + key] = value;

    auto unknown = [&]() -> ConfigError {
      return ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
    };

    if (section == "experiment") {
      if (key == "kind") {
        if (std::find(kExperimentKinds.begin(), kExperimentKinds.end(), value) ==
            kExperimentKinds.end())
          throw ConfigError("config: unknown experiment kind '" + value + "'");
        cfg.kind = value;
      } else {
        throw unknown();
      }
    } else if (section == "system") {
      if (key == "kind") {
        if (value != "doubling" && value != "lsv" && value != "neutral_circle")
          throw ConfigError("config: unknown system kind '" + value + "'");
        cfg.system = value;
      } else if (key == "alpha") {
        cfg.alpha = parse_double(key, value);
      } else if (key == "base_lo") {
        cfg.base_lo = parse_double(key, value);
      } else if (key == "base_hi") {
        cfg.base_hi = parse_double(key, value);
      } else {
        throw unknown();
      }
    } else if (section == "observable") {
      if (key == "kind") {
        if (value != "cos" && value != "coordinate" && value != "cos_pair")
          throw ConfigError("config: unknown observable kind '" + value + "'");
        cfg.observable = value;
      } else if (key == "harmonic") {
        cfg.harmonic = static_cast<int>(parse_count(key, value));
      } else {
        throw unknown();
      }
    } else if (section == "billiard") {
      if (key == "disks") {
        cfg.disks = parse_disks(key, value);
      } else {
        throw unknown();
      }
    } else if (section == "budget") {
      if (key == "orbit") cfg.orbit = parse_count(key, value);
      else if (key == "replicas") cfg.replicas = parse_count(key, value);
      else if (key == "horizon") cfg.horizon = parse_count(key, value);
      else if (key == "batches") cfg.batches = parse_count(key, value);
      else if (key == "depth") cfg.depth = static_cast<int>(parse_count(key, value));
      else if (key == "delta") cfg.delta = parse_double(key, value);
      else if (key == "t_total") cfg.t_total = parse_double(key, value);
      else throw unknown();
    } else if (section == "accept") {
      if (key == "gamma_lo") cfg.gamma_lo = parse_double(key, value);
      else if (key == "gamma_hi") cfg.gamma_hi = parse_double(key, value);
      else if (key == "min_r2") cfg.min_r2 = parse_double(key, value);
      else if (key == "rel_tol") cfg.rel_tol = parse_double(key, value);
      else if (key == "band_lo") cfg.band_lo = parse_double(key, value);
      else if (key == "band_hi") cfg.band_hi = parse_double(key, value);
      else if (key == "alpha_level") cfg.alpha_level = parse_double(key, value);
      else throw unknown();
    } else if (section == "run") {
      if (key == "seed") {
        cfg.seed = parse_count(key, value);
        cfg.seed_set = true;
      } else if (key == "out") {
        cfg.out_dir = value;
      } else if (key == "threads") {
        cfg.threads = static_cast<int>(parse_count(key, value));
      } else if (key == "plots") {
        if (value != "true" && value != "false")
          throw ConfigError("config: key 'plots' must be true or false");
        cfg.plots = value == "true";
      } else {
        throw unknown();
      }
    } else {
      throw ConfigError("config: key '" + key + "' appears before any section");
    }
  }
  if (cfg.kind.empty()) throw ConfigError("config: missing [experiment] kind");
  if (!cfg.seed_set) throw ConfigError("config: missing [run] seed (no wall-clock default)");
  if (!(cfg.base_lo >= 0.0 && cfg.base_lo < cfg.base_hi && cfg.base_hi <= 1.0))
    throw ConfigError("config: base interval must satisfy 0 <= base_lo < base_hi <= 1");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace towerlimits
