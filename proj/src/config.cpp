#include "cycfed/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cycfed/engine.hpp"

namespace cycfed {

namespace {

struct RawValue {
  enum class Kind { Number, String, Boolean, NumberArray } kind = Kind::Number;
  double number = 0.0;
  std::string string;
  bool boolean = false;
  std::vector<double> array;
  int line = 0;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

double parse_number(const std::string& tok, int line) {
  size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &consumed);
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + tok + "'");
  }
  if (consumed != tok.size()) throw ConfigError(line, "trailing junk in number '" + tok + "'");
  return v;
}

RawValue parse_value(const std::string& raw, int line) {
  RawValue v;
  v.line = line;
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw ConfigError(line, "unterminated string");
    v.kind = RawValue::Kind::String;
    v.string = s.substr(1, s.size() - 2);
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = RawValue::Kind::Boolean;
    v.boolean = s == "true";
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError(line, "unterminated array");
    v.kind = RawValue::Kind::NumberArray;
    std::string body = s.substr(1, s.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(line, "empty array element");
      v.array.push_back(parse_number(item, line));
    }
    return v;
  }
  v.kind = RawValue::Kind::Number;
  v.number = parse_number(s, line);
  return v;
}

using Table = std::map<std::string, RawValue>;

class Validator {
 public:
  explicit Validator(Table table) : table_(std::move(table)) {}

  bool has(const std::string& key) const { return table_.count(key) > 0; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = take(key);
    if (v.kind != RawValue::Kind::Number)
      throw ConfigError(v.line, "key '" + key + "' must be a number");
    return v.number;
  }

  int integer(const std::string& key, int fallback) {
    const double d = number(key, fallback);
    if (d != std::floor(d)) throw ConfigError(line_of(key), "key '" + key + "' must be an integer");
    return static_cast<int>(d);
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = take(key);
    if (v.kind != RawValue::Kind::Number || v.number < 0 || v.number != std::floor(v.number))
      throw ConfigError(v.line, "key '" + key + "' must be a non-negative integer");
    return static_cast<std::uint64_t>(v.number);
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = take(key);
    if (v.kind != RawValue::Kind::String)
      throw ConfigError(v.line, "key '" + key + "' must be a string");
    return v.string;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = take(key);
    if (v.kind != RawValue::Kind::Boolean)
      throw ConfigError(v.line, "key '" + key + "' must be true or false");
    return v.boolean;
  }

  std::vector<double> number_array(const std::string& key) {
    if (!has(key)) return {};
    const RawValue& v = take(key);
    if (v.kind != RawValue::Kind::NumberArray)
      throw ConfigError(v.line, "key '" + key + "' must be an array of numbers");
    return v.array;
  }

  // Number or the string "theorem".
  void eta(const std::string& key, double* value, bool* theorem) {
    if (!has(key)) return;
    const RawValue& v = take(key);
    if (v.kind == RawValue::Kind::String) {
      if (v.string != "theorem")
        throw ConfigError(v.line, "eta must be a number or \"theorem\"");
      *theorem = true;
    } else if (v.kind == RawValue::Kind::Number) {
      *value = v.number;
      *theorem = false;
    } else {
      throw ConfigError(v.line, "eta must be a number or \"theorem\"");
    }
  }

  void finish(const std::string& table_name) const {
    for (const auto& [key, v] : table_) {
      if (!used_.count(key))
        throw ConfigError(v.line, "unknown key '" + key + "' in [" + table_name + "]");
    }
  }

 private:
  const RawValue& take(const std::string& key) {
    used_.insert(key);
    return table_.at(key);
  }
  int line_of(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? 0 : it->second.line;
  }

  Table table_;
  std::set<std::string> used_;
};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, Table> tables;
  std::vector<std::string> table_order;
  std::string current;
  std::istringstream in(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = trim(strip_comment(raw_line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "malformed table header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) throw ConfigError(line_no, "empty table name");
      if (tables.count(current)) throw ConfigError(line_no, "duplicate table [" + current + "]");
      tables[current] = {};
      table_order.push_back(current);
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    if (current.empty()) throw ConfigError(line_no, "key outside any table");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    if (tables[current].count(key))
      throw ConfigError(line_no, "duplicate key '" + key + "' in [" + current + "]");
    tables[current][key] = parse_value(line.substr(eq + 1), line_no);
  }

  static const std::set<std::string> known_tables = {"population", "schedule", "run", "sweep",
                                                     "output"};
  for (const auto& name : table_order)
    if (!known_tables.count(name)) throw ConfigError(0, "unknown table [" + name + "]");
  if (!tables.count("population")) throw ConfigError(0, "missing [population] block");
  if (!tables.count("run")) throw ConfigError(0, "missing [run] block");

  ExperimentConfig cfg;

  {
    Validator pop(tables["population"]);
    cfg.kind = pop.string("kind", "quadratic");
    if (cfg.kind != "quadratic" && cfg.kind != "dataset")
      throw ConfigError(0, "population kind must be \"quadratic\" or \"dataset\"");
    cfg.population_seed = pop.seed("seed", 0);
    cfg.clients = pop.integer("clients", 1);
    cfg.k_bar = pop.integer("k_bar", 1);
    cfg.components = pop.integer("components", 1);
    if (cfg.kind == "quadratic") {
      cfg.dim = pop.integer("dim", 2);
      cfg.gamma = pop.number("gamma", 0.0);
      cfg.alpha = pop.number("alpha", 0.0);
      cfg.nu_bar = pop.number("nu_bar", 0.0);
      cfg.spectrum = pop.number_array("spectrum");
      cfg.hessian_jitter = pop.number("hessian_jitter", 0.0);
    } else {
      cfg.dim = pop.integer("dim", 2);
      cfg.classes = pop.integer("classes", 2);
      cfg.samples = pop.integer("samples", 100);
      cfg.separation = pop.number("separation", 1.0);
      cfg.concentration = pop.number("concentration", 1.0);
      cfg.l2 = pop.number("l2", 1e-3);
      cfg.grouping = pop.string("grouping", "label-sorted");
      if (cfg.grouping != "label-sorted" && cfg.grouping != "random")
        throw ConfigError(0, "grouping must be \"label-sorted\" or \"random\"");
    }
    pop.finish("population");
    if (cfg.clients < 1 || cfg.k_bar < 1 || cfg.clients % cfg.k_bar != 0)
      throw ConfigError(0, "k_bar must divide clients");
  }

  if (tables.count("schedule")) {
    Validator sched(tables["schedule"]);
    cfg.order = sched.string("order", "identity");
    if (cfg.order != "identity" && cfg.order != "shuffled")
      throw ConfigError(0, "order must be \"identity\" or \"shuffled\"");
    cfg.order_seed = sched.seed("order_seed", 0);
    sched.finish("schedule");
  }

  {
    Validator run(tables["run"]);
    cfg.mode = run.string("mode", "GD");
    mode_from_name(cfg.mode);  // validates
    cfg.cycles = run.integer("cycles", 1);
    cfg.clients_per_round = run.integer("clients_per_round", 1);
    run.eta("eta", &cfg.eta, &cfg.eta_theorem);
    cfg.tau = run.integer("tau", 1);
    cfg.minibatch = run.integer("minibatch", 1);
    cfg.run_seed = run.seed("seed", 0);
    cfg.record_iterates = run.boolean("record_iterates", false);
    cfg.init_scale = run.number("init_scale", 0.0);
    run.finish("run");
    if (cfg.cycles < 0) throw ConfigError(0, "cycles must be >= 0");
    if (cfg.clients_per_round < 1 ||
        cfg.clients_per_round > cfg.clients / cfg.k_bar)
      throw ConfigError(0, "clients_per_round must be in [1, clients/k_bar]");
    if (!cfg.eta_theorem && !(cfg.eta >= 0.0))
      throw ConfigError(0, "eta must be >= 0");
  }

  if (tables.count("sweep")) {
    Validator sweep(tables["sweep"]);
    cfg.has_sweep = true;
    for (double v : sweep.number_array("k_bar")) {
      if (v < 1 || v != std::floor(v)) throw ConfigError(0, "sweep k_bar entries must be positive integers");
      cfg.sweep_k_bar.push_back(static_cast<int>(v));
    }
    for (double v : sweep.number_array("rounds")) {
      if (v < 1 || v != std::floor(v)) throw ConfigError(0, "sweep rounds entries must be positive integers");
      cfg.sweep_rounds.push_back(static_cast<int>(v));
    }
    for (double v : sweep.number_array("seeds")) {
      if (v < 0 || v != std::floor(v)) throw ConfigError(0, "sweep seeds must be non-negative integers");
      cfg.sweep_seeds.push_back(static_cast<std::uint64_t>(v));
    }
    sweep.finish("sweep");
  }

  if (tables.count("output")) {
    Validator out(tables["output"]);
    cfg.out_dir = out.string("dir", "");
    cfg.export_shards = out.boolean("export_shards", false);
    out.finish("output");
  }

  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[population]\n";
  os << "kind = \"" << cfg.kind << "\"\n";
  os << "seed = " << cfg.population_seed << "\n";
  os << "clients = " << cfg.clients << "\n";
  os << "k_bar = " << cfg.k_bar << "\n";
  os << "components = " << cfg.components << "\n";
  if (cfg.kind == "quadratic") {
    os << "dim = " << cfg.dim << "\n";
    os << "gamma = " << format_double(cfg.gamma) << "\n";
    os << "alpha = " << format_double(cfg.alpha) << "\n";
    os << "nu_bar = " << format_double(cfg.nu_bar) << "\n";
    if (!cfg.spectrum.empty()) {
      os << "spectrum = [";
      for (size_t i = 0; i < cfg.spectrum.size(); ++i)
        os << (i ? ", " : "") << format_double(cfg.spectrum[i]);
      os << "]\n";
    }
    os << "hessian_jitter = " << format_double(cfg.hessian_jitter) << "\n";
  } else {
    os << "dim = " << cfg.dim << "\n";
    os << "classes = " << cfg.classes << "\n";
    os << "samples = " << cfg.samples << "\n";
    os << "separation = " << format_double(cfg.separation) << "\n";
    os << "concentration = " << format_double(cfg.concentration) << "\n";
    os << "l2 = " << format_double(cfg.l2) << "\n";
    os << "grouping = \"" << cfg.grouping << "\"\n";
  }
  os << "\n[schedule]\n";
  os << "order = \"" << cfg.order << "\"\n";
  os << "order_seed = " << cfg.order_seed << "\n";
  os << "\n[run]\n";
  os << "mode = \"" << cfg.mode << "\"\n";
  os << "cycles = " << cfg.cycles << "\n";
  os << "clients_per_round = " << cfg.clients_per_round << "\n";
  if (cfg.eta_theorem)
    os << "eta = \"theorem\"\n";
  else
    os << "eta = " << format_double(cfg.eta) << "\n";
  os << "tau = " << cfg.tau << "\n";
  os << "minibatch = " << cfg.minibatch << "\n";
  os << "seed = " << cfg.run_seed << "\n";
  os << "record_iterates = " << (cfg.record_iterates ? "true" : "false") << "\n";
  os << "init_scale = " << format_double(cfg.init_scale) << "\n";
  if (cfg.has_sweep) {
    os << "\n[sweep]\n";
    auto emit_ints = [&os](const char* key, const auto& values) {
      if (values.empty()) return;
      os << key << " = [";
      for (size_t i = 0; i < values.size(); ++i) os << (i ? ", " : "") << values[i];
      os << "]\n";
    };
    emit_ints("k_bar", cfg.sweep_k_bar);
    emit_ints("rounds", cfg.sweep_rounds);
    emit_ints("seeds", cfg.sweep_seeds);
  }
  if (!cfg.out_dir.empty() || cfg.export_shards) {
    os << "\n[output]\n";
    if (!cfg.out_dir.empty()) os << "dir = \"" << cfg.out_dir << "\"\n";
    if (cfg.export_shards) os << "export_shards = true\n";
  }
  return os.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace cycfed
