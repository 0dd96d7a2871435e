#include "rebama/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "rebama/error.hpp"

namespace rebama {

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error("cannot format double");
  std::string s(buf, end);
  // Keep integral values visibly floating point.
  if (std::isfinite(value) && s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

// section -> key -> entry, with every key checked against an allow-list.
class Ini {
 public:
  using Schema = std::map<std::string, std::set<std::string>>;

  Ini(const std::string& text, const Schema& schema, const std::set<std::string>& prefixed_keys = {}) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find_first_of("#;");
      const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') fail(line, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!schema.contains(section)) fail(line, "unknown section [" + section + "]");
        if (!seen_sections_.insert(section).second) fail(line, "duplicate section [" + section + "]");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(line, "expected key = value");
      if (section.empty()) fail(line, "key outside of any section");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) fail(line, "empty key");
      const auto& allowed = schema.at(section);
      bool known = allowed.contains(key);
      if (!known) {
        const auto dot = key.find('.');
        known = dot != std::string::npos && prefixed_keys.contains(section + "." + key.substr(0, dot));
      }
      if (!known) fail(line, "unknown key '" + key + "' in [" + section + "]");
      auto& keys = data_[section];
      if (keys.contains(key)) fail(line, "duplicate key '" + key + "' in [" + section + "]");
      keys[key] = {value, line};
    }
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = data_.find(section);
    if (s == data_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  const std::map<std::string, Entry>* keys(const std::string& section) const {
    const auto s = data_.find(section);
    return s == data_.end() ? nullptr : &s->second;
  }

  [[noreturn]] static void fail(int line, const std::string& what) {
    throw ValidationError("line " + std::to_string(line) + ": " + what);
  }

 private:
  std::set<std::string> seen_sections_;
  std::map<std::string, std::map<std::string, Entry>> data_;
};

std::string where(const std::string& section, const std::string& key, const Entry& e) {
  return "line " + std::to_string(e.line) + ": " + section + "." + key;
}

double to_double(const std::string& section, const std::string& key, const Entry& e,
                 const std::string& token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw ValidationError(where(section, key, e) + ": '" + token + "' is not a finite number");
  }
  return v;
}

long long to_integer(const std::string& section, const std::string& key, const Entry& e,
                     const std::string& token) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ValidationError(where(section, key, e) + ": '" + token + "' is not an integer");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!value.empty() && value.back() == ',') out.emplace_back();
  return out;
}

class Reader {
 public:
  explicit Reader(const Ini& ini) : ini_(ini) {}

  template <typename T>
  void number(const std::string& section, const std::string& key, T& out) const {
    const Entry* e = ini_.find(section, key);
    if (!e) return;
    if constexpr (std::is_floating_point_v<T>) {
      out = to_double(section, key, *e, e->value);
    } else {
      const long long v = to_integer(section, key, *e, e->value);
      if (!std::in_range<T>(v)) {
        throw ValidationError(where(section, key, *e) + ": value out of range");
      }
      out = static_cast<T>(v);
    }
  }

  void boolean(const std::string& section, const std::string& key, bool& out) const {
    const Entry* e = ini_.find(section, key);
    if (!e) return;
    if (e->value == "true") {
      out = true;
    } else if (e->value == "false") {
      out = false;
    } else {
      throw ValidationError(where(section, key, *e) + ": expected true or false");
    }
  }

  void text(const std::string& section, const std::string& key, std::string& out) const {
    const Entry* e = ini_.find(section, key);
    if (!e) return;
    if (e->value.empty()) throw ValidationError(where(section, key, *e) + ": empty value");
    out = e->value;
  }

  // Comma list of `n` values, or a single value broadcast to all n.
  template <typename T>
  bool list(const std::string& section, const std::string& key, int n, std::vector<T>& out) const {
    const Entry* e = ini_.find(section, key);
    if (!e) return false;
    const auto tokens = split_list(e->value);
    if (tokens.size() != 1 && static_cast<int>(tokens.size()) != n) {
      throw ValidationError(where(section, key, *e) + ": expected 1 or " + std::to_string(n) +
                            " values, got " + std::to_string(tokens.size()));
    }
    std::vector<T> values;
    for (const auto& t : tokens) {
      if constexpr (std::is_floating_point_v<T>) {
        values.push_back(to_double(section, key, *e, t));
      } else {
        values.push_back(static_cast<T>(to_integer(section, key, *e, t)));
      }
    }
    if (values.size() == 1) values.assign(static_cast<std::size_t>(n), values.front());
    out = std::move(values);
    return true;
  }

  const Entry* require(const std::string& section, const std::string& key) const {
    const Entry* e = ini_.find(section, key);
    if (!e) throw ValidationError("missing required key " + section + "." + key);
    return e;
  }

 private:
  const Ini& ini_;
};

const Ini::Schema kScenarioSchema{
    {"grid", {"width", "height"}},
    {"stations", {"spots"}},
    {"fleet", {"vehicles", "battery_min", "battery_max"}},
    {"demand", {"horizon", "rate"}},
    {"battery", {"threshold", "idle_drain", "trip_drain", "drain_on_relocation"}},
    {"durations", {"charge", "trip_base", "trip_per_hop"}},
};

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

const char* to_string(ProjectionMethod m) {
  return m == ProjectionMethod::dykstra ? "dykstra" : "closed_form";
}

const char* to_string(EmptySpotRule r) {
  return r == EmptySpotRule::as_printed ? "as_printed" : "perturbed_still";
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  const Ini ini(text, kScenarioSchema, {"demand.od"});
  const Reader read(ini);

  GridConfig gc;
  gc.width = static_cast<int>(to_integer("grid", "width", *read.require("grid", "width"),
                                         read.require("grid", "width")->value));
  gc.height = static_cast<int>(to_integer("grid", "height", *read.require("grid", "height"),
                                          read.require("grid", "height")->value));
  if (gc.width < 1 || gc.height < 1) throw ValidationError("grid.width and grid.height must be >= 1");
  const int n = gc.width * gc.height;
  read.require("stations", "spots");
  read.list("stations", "spots", n, gc.spots);

  Scenario scenario;
  scenario.grid = build_grid(gc);

  auto& fleet = scenario.fleet;
  read.require("fleet", "vehicles");
  read.list("fleet", "vehicles", n, fleet.vehicles);
  read.number("fleet", "battery_min", fleet.battery_min);
  read.number("fleet", "battery_max", fleet.battery_max);

  auto& demand = scenario.demand;
  read.number("demand", "horizon", demand.horizon);
  read.require("demand", "rate");
  read.list("demand", "rate", n, demand.demand_rate);
  demand.od_matrix.assign(static_cast<std::size_t>(n),
                          std::vector<double>(static_cast<std::size_t>(n), 1.0 / n));
  if (const auto* keys = ini.keys("demand")) {
    for (const auto& [key, entry] : *keys) {
      if (!key.starts_with("od.")) continue;
      const std::string idx = key.substr(3);
      const long long origin = to_integer("demand", key, entry, idx);
      if (origin < 0 || origin >= n) {
        throw ValidationError(where("demand", key, entry) + ": origin out of range [0, " +
                              std::to_string(n) + ")");
      }
      std::vector<double> row;
      read.list("demand", key, n, row);
      if (split_list(entry.value).size() != static_cast<std::size_t>(n)) {
        throw ValidationError(where("demand", key, entry) + ": od rows need " + std::to_string(n) +
                              " values");
      }
      demand.od_matrix[static_cast<std::size_t>(origin)] = std::move(row);
    }
  }

  read.number("battery", "threshold", demand.low_battery_threshold);
  read.number("battery", "idle_drain", demand.idle_drain);
  read.number("battery", "trip_drain", demand.trip_drain);
  read.boolean("battery", "drain_on_relocation", demand.drain_on_relocation);
  read.number("durations", "charge", demand.charge_duration);
  read.number("durations", "trip_base", demand.trip_base);
  read.number("durations", "trip_per_hop", demand.trip_per_hop);

  validate(demand, scenario.grid);
  validate(fleet, scenario.grid, demand);
  return scenario;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_scenario_text(text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_scenario(const Scenario& scenario) {
  const auto& g = scenario.grid;
  const auto& d = scenario.demand;
  const auto& f = scenario.fleet;
  std::ostringstream os;
  os << "[grid]\nwidth = " << g.width() << "\nheight = " << g.height() << "\n\n";
  os << "[stations]\nspots = " << join(std::vector<int>(g.spots().begin(), g.spots().end()))
     << "\n\n";
  os << "[fleet]\nvehicles = " << join(f.vehicles) << "\nbattery_min = " << format_double(f.battery_min)
     << "\nbattery_max = " << format_double(f.battery_max) << "\n\n";
  os << "[demand]\nhorizon = " << d.horizon << "\nrate = " << join(d.demand_rate) << '\n';
  for (std::size_t i = 0; i < d.od_matrix.size(); ++i) {
    os << "od." << i << " = " << join(d.od_matrix[i]) << '\n';
  }
  os << "\n[battery]\nthreshold = " << format_double(d.low_battery_threshold)
     << "\nidle_drain = " << format_double(d.idle_drain)
     << "\ntrip_drain = " << format_double(d.trip_drain)
     << "\ndrain_on_relocation = " << (d.drain_on_relocation ? "true" : "false") << "\n\n";
  os << "[durations]\ncharge = " << d.charge_duration << "\ntrip_base = " << d.trip_base
     << "\ntrip_per_hop = " << d.trip_per_hop << '\n';
  return os.str();
}

std::string scenario_fingerprint(const Scenario& scenario) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : serialize_scenario(scenario)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

const Ini::Schema kRunSchema{
    {"run", {"scenario", "output", "checkpoint_interval"}},
    {"trainer",
     {"gamma", "batch_size", "learning_rate", "tau", "delta", "episodes", "steps_per_episode",
      "beta", "exploration_sigma", "baseline", "seed", "replay_capacity", "projection",
      "dykstra_tol", "dykstra_max_iter", "empty_spot_rule", "observation_scale", "hidden"}},
    {"adversary",
     {"demand_lower", "demand_upper", "charge_lower", "charge_upper", "vacant_lower",
      "vacant_upper"}},
    {"eval", {"noise_sigma", "seeds"}},
};

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  const Ini ini(text, kRunSchema);
  const Reader read(ini);
  RunConfig rc;

  std::string scenario;
  read.require("run", "scenario");
  read.text("run", "scenario", scenario);
  rc.scenario_path = std::filesystem::path(scenario);
  if (rc.scenario_path.is_relative()) rc.scenario_path = base_dir / rc.scenario_path;
  std::string output;
  read.text("run", "output", output);
  if (!output.empty()) rc.output_dir = output;
  read.number("run", "checkpoint_interval", rc.checkpoint_interval);
  if (rc.checkpoint_interval < 0) throw ValidationError("run.checkpoint_interval must be >= 0");

  auto& t = rc.trainer;
  read.number("trainer", "gamma", t.gamma);
  read.number("trainer", "batch_size", t.batch_size);
  read.number("trainer", "learning_rate", t.learning_rate);
  read.number("trainer", "tau", t.tau);
  read.number("trainer", "delta", t.delta);
  read.number("trainer", "episodes", t.episodes);
  read.number("trainer", "steps_per_episode", t.steps_per_episode);
  read.number("trainer", "beta", t.beta);
  read.number("trainer", "exploration_sigma", t.exploration_sigma);
  read.boolean("trainer", "baseline", t.baseline);
  read.number("trainer", "seed", t.seed);
  read.number("trainer", "replay_capacity", t.replay_capacity);
  read.number("trainer", "dykstra_tol", t.dykstra.tol);
  read.number("trainer", "dykstra_max_iter", t.dykstra.max_iter);
  read.number("trainer", "observation_scale", t.observation_scale);
  read.number("trainer", "hidden", t.hidden);
  if (const Entry* e = ini.find("trainer", "projection")) {
    if (e->value == "dykstra") {
      t.projection = ProjectionMethod::dykstra;
    } else if (e->value == "closed_form") {
      t.projection = ProjectionMethod::closed_form;
    } else {
      throw ValidationError(where("trainer", "projection", *e) + ": expected dykstra or closed_form");
    }
  }
  if (const Entry* e = ini.find("trainer", "empty_spot_rule")) {
    if (e->value == "as_printed") {
      t.empty_spot_rule = EmptySpotRule::as_printed;
    } else if (e->value == "perturbed_still") {
      t.empty_spot_rule = EmptySpotRule::perturbed_still;
    } else {
      throw ValidationError(where("trainer", "empty_spot_rule", *e) +
                            ": expected as_printed or perturbed_still");
    }
  }

  const char* names[] = {"demand", "charge", "vacant"};
  for (int k = 0; k < 3; ++k) {
    read.number("adversary", std::string(names[k]) + "_lower", t.box.lower[k]);
    read.number("adversary", std::string(names[k]) + "_upper", t.box.upper[k]);
  }

  read.number("eval", "noise_sigma", rc.eval.noise_sigma);
  if (!(rc.eval.noise_sigma >= 0.0)) throw ValidationError("eval.noise_sigma must be >= 0");
  if (const Entry* e = ini.find("eval", "seeds")) {
    rc.eval.seeds.clear();
    for (const auto& token : split_list(e->value)) {
      const long long s = to_integer("eval", "seeds", *e, token);
      if (s < 0) throw ValidationError(where("eval", "seeds", *e) + ": seeds must be >= 0");
      rc.eval.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (rc.eval.seeds.empty()) throw ValidationError(where("eval", "seeds", *e) + ": empty list");
  }
  rc.eval.beta = t.beta;
  rc.eval.projection = t.projection;

  if (!std::filesystem::is_regular_file(rc.scenario_path)) {
    throw ValidationError("run.scenario: file not found: " + rc.scenario_path.string());
  }
  rc.scenario = parse_scenario(rc.scenario_path);
  validate(t, rc.scenario);
  return rc;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_run_config_text(text, path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_run_config(const RunConfig& rc) {
  const auto& t = rc.trainer;
  std::ostringstream os;
  os << "[run]\nscenario = " << rc.scenario_path.generic_string()
     << "\noutput = " << rc.output_dir.generic_string()
     << "\ncheckpoint_interval = " << rc.checkpoint_interval << "\n\n";
  os << "[trainer]\ngamma = " << format_double(t.gamma) << "\nbatch_size = " << t.batch_size
     << "\nlearning_rate = " << format_double(t.learning_rate) << "\ntau = " << format_double(t.tau)
     << "\ndelta = " << format_double(t.delta) << "\nepisodes = " << t.episodes
     << "\nsteps_per_episode = " << t.steps_per_episode << "\nbeta = " << format_double(t.beta)
     << "\nexploration_sigma = " << format_double(t.exploration_sigma)
     << "\nbaseline = " << (t.baseline ? "true" : "false") << "\nseed = " << t.seed
     << "\nreplay_capacity = " << t.replay_capacity << "\nprojection = " << to_string(t.projection)
     << "\ndykstra_tol = " << format_double(t.dykstra.tol)
     << "\ndykstra_max_iter = " << t.dykstra.max_iter
     << "\nempty_spot_rule = " << to_string(t.empty_spot_rule)
     << "\nobservation_scale = " << format_double(t.observation_scale)
     << "\nhidden = " << t.hidden
     << "\n\n";
  os << "[adversary]\n";
  const char* names[] = {"demand", "charge", "vacant"};
  for (int k = 0; k < 3; ++k) {
    os << names[k] << "_lower = " << format_double(t.box.lower[k]) << '\n';
    os << names[k] << "_upper = " << format_double(t.box.upper[k]) << '\n';
  }
  os << "\n[eval]\nnoise_sigma = " << format_double(rc.eval.noise_sigma) << "\nseeds = ";
  for (std::size_t i = 0; i < rc.eval.seeds.size(); ++i) os << (i ? ", " : "") << rc.eval.seeds[i];
  os << '\n';
  return os.str();
}

std::string metrics_csv(const std::vector<EpisodeMetrics>& log) {
  std::string out = "episode,mean_reward,mean_u_c,mean_u_s,critic_loss\n";
  for (const auto& m : log) {
    out += std::to_string(m.episode) + ',' + format_double(m.mean_reward) + ',' +
           format_double(m.mean_u_c) + ',' + format_double(m.mean_u_s) + ',' +
           format_double(m.critic_loss) + '\n';
  }
  return out;
}

void export_metrics(const std::vector<EpisodeMetrics>& log, const std::filesystem::path& path) {
  if (log.empty()) throw ValidationError("cannot export an empty metrics log");
  write_text_file(path, metrics_csv(log));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace rebama
