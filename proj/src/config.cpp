#include "affectfuse/config.hpp"

#include "affectfuse/error.hpp"
#include "affectfuse/learners.hpp"
#include "csv.hpp"

#include <boost/algorithm/string/classification.hpp>
#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <sstream>

namespace affectfuse::config {

namespace fs = std::filesystem;
using csv::format_double;

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

std::map<std::string, std::string> defaults() {
  const pipeline::RunConfig run;
  const features::WindowConfig& w = run.windows;
  const learners::LearnerParams& p = run.ensemble.params;
  const corpus::SynthesisSpec synth;
  const eval::LagSweepOptions lag;

  std::vector<std::string> roster;
  for (auto k : run.ensemble.roster) roster.emplace_back(learners::kind_name(k));
  std::vector<std::string> delays;
  for (double d : lag.delays) delays.push_back(format_double(d));

  return {
      {"run.scenarios", "across_time"},
      {"run.label_mode", std::string(pipeline::label_mode_name(run.label_mode))},
      {"run.seed", std::to_string(run.seed)},
      {"run.workers", std::to_string(run.workers)},
      {"run.smoothing", std::to_string(run.smoothing)},
      {"run.validation_fraction", format_double(run.validation_fraction)},
      {"run.save_models", run.save_models ? "true" : "false"},

      {"features.ecg_window_s", format_double(w.ecg_s)},
      {"features.bvp_window_s", format_double(w.bvp_s)},
      {"features.rsp_window_s", format_double(w.rsp_s)},
      {"features.gsr_window_s", format_double(w.gsr_s)},
      {"features.skt_window_s", format_double(w.skt_s)},
      {"features.emg_window_s", format_double(w.emg_s)},
      {"features.context_halfwidth_s", format_double(w.raw_context_halfwidth_s)},
      {"features.context_rate_hz", format_double(w.raw_context_rate_hz)},
      {"features.max_delay_s", format_double(w.max_delay_s)},

      {"learners.roster", join(roster)},
      {"learners.iterations", std::to_string(run.ensemble.iterations)},
      {"learners.refit_on_all", run.ensemble.refit_on_all ? "true" : "false"},
      {"learners.knn_k", std::to_string(p.knn_k)},
      {"learners.forest_trees", std::to_string(p.forest_trees)},
      {"learners.forest_max_depth", std::to_string(p.forest_max_depth)},
      {"learners.forest_min_leaf", std::to_string(p.forest_min_leaf)},
      {"learners.rf_max_features", format_double(p.rf_max_features)},
      {"learners.et_max_features", format_double(p.et_max_features)},
      {"learners.gbt_rounds", std::to_string(p.gbt_rounds)},
      {"learners.gbt_max_depth", std::to_string(p.gbt_max_depth)},
      {"learners.gbt_min_leaf", std::to_string(p.gbt_min_leaf)},
      {"learners.gbt_learning_rate", format_double(p.gbt_learning_rate)},
      {"learners.ridge_lambda", format_double(p.ridge_lambda)},
      {"learners.max_bins", std::to_string(p.max_bins)},

      {"paths.data", ""},
      {"paths.output", ""},

      {"synth.seed", "0"},
      {"synth.subjects", std::to_string(synth.subjects)},
      {"synth.videos", std::to_string(synth.videos)},
      {"synth.duration_s", format_double(synth.duration_s)},
      {"synth.train_fraction", format_double(synth.train_fraction)},
      {"synth.gap_s", format_double(synth.gap_s)},
      {"synth.coupling_gain", format_double(synth.coupling_gain)},
      {"synth.noise_level", format_double(synth.noise_level)},
      {"synth.affect_sd", format_double(synth.affect_sd)},
      {"synth.affect_period_s", format_double(synth.affect_period_s)},
      {"synth.affect_damping", format_double(synth.affect_damping)},
      {"synth.label_lag_s", format_double(synth.label_lag_s)},
      {"synth.fast_valence_amplitude", format_double(synth.fast_valence_amplitude)},
      {"synth.fast_valence_bandwidth_hz", format_double(synth.fast_valence_bandwidth_hz)},
      {"synth.scenarios", "across_time"},

      {"lag.scenario", std::string(corpus::scenario_name(lag.scenario))},
      {"lag.fold", std::to_string(lag.fold)},
      {"lag.subsets", join(lag.subsets)},
      {"lag.delays", join(delays)},
      {"lag.test_fraction", format_double(lag.test_fraction)},
      {"lag.smoothing", std::to_string(lag.smoothing)},
      {"lag.roster", ""},
  };
}

const std::map<std::string, std::string>& default_values() {
  static const auto d = defaults();
  return d;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view expected) {
  throw Error(Errc::config_error, fmt::format("{}: '{}' is not {}", key, value, expected));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  const std::string s = boost::algorithm::trim_copy(value);
  T out{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  if (s.empty() || ec != std::errc() || ptr != end) {
    if constexpr (std::is_floating_point_v<T>) bad_value(key, value, "a number");
    else bad_value(key, value, "an integer");
  }
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) bad_value(key, value, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string s = boost::algorithm::trim_copy(value);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> parts;
  const std::string s = boost::algorithm::trim_copy(value);
  if (s.empty()) return parts;
  boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

corpus::Scenario parse_scenario_value(const std::string& key, const std::string& v) {
  if (auto s = corpus::parse_scenario(v)) return *s;
  bad_value(key, v, "a scenario (1-4 or across_time/across_subject/across_elicitor/across_version)");
}

std::vector<corpus::Scenario> parse_scenarios(const std::string& key, const std::string& value) {
  std::vector<corpus::Scenario> out;
  const auto parts = parse_list(value);
  if (parts.size() == 1 && parts[0] == "all") return {corpus::kAllScenarios.begin(), corpus::kAllScenarios.end()};
  for (const auto& p : parts) {
    const auto s = parse_scenario_value(key, p);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  if (out.empty()) bad_value(key, value, "a non-empty scenario list");
  return out;
}

std::vector<learners::ModelKind> parse_roster(const std::string& key, const std::string& value) {
  std::vector<learners::ModelKind> out;
  for (const auto& p : parse_list(value)) {
    try {
      out.push_back(learners::parse_model_kind(p));
    } catch (const Error&) {
      bad_value(key, p, "a model kind");
    }
  }
  if (out.empty()) bad_value(key, value, "a non-empty model roster");
  return out;
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const auto keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, v] : default_values()) k.push_back(key);
    return k;
  }();
  return keys;
}

Config::Config() : values_(default_values()) {}

Config Config::from_string(std::string_view ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::config_error, fmt::format("line {}: {}", e.line(), e.message()));
  }
  Config cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty())
      throw Error(Errc::config_error, fmt::format("key '{}' must be inside a [section]", section));
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.get_value<std::string>());
  }
  return cfg;
}

Config Config::from_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(Errc::config_error, fmt::format("config file {} not found", path.string()));
  try {
    return from_string(csv::read_text(path));
  } catch (const Error& e) {
    e.rethrow_with(path.string());
  }
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::config_error, fmt::format("unknown config key '{}'", key));
  it->second = boost::algorithm::trim_copy(value);
  explicit_[key] = true;
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw Error(Errc::config_error, fmt::format("override '{}' is not key=value", assignment));
  set(boost::algorithm::trim_copy(std::string(assignment.substr(0, eq))), std::string(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::config_error, fmt::format("unknown config key '{}'", key));
  return it->second;
}

bool Config::is_set_explicitly(const std::string& key) const { return explicit_.count(key) != 0; }

std::map<std::string, std::string> Config::echo() const {
  auto out = values_;
  out.erase("paths.output");
  return out;
}

std::string Config::to_ini() const {
  std::string out, section;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += fmt::format("{}[{}]\n", out.empty() ? "" : "\n", s);
      section = s;
    }
    out += fmt::format("{} = {}\n", key.substr(dot + 1), value);
  }
  return out;
}

pipeline::RunConfig Config::run_config() const {
  pipeline::RunConfig r;
  auto num = [&](const char* k) { return parse_number<double>(k, get(k)); };
  auto integer = [&](const char* k) { return parse_number<int>(k, get(k)); };
  r.scenarios = parse_scenarios("run.scenarios", get("run.scenarios"));
  try {
    r.label_mode = pipeline::parse_label_mode(get("run.label_mode"));
  } catch (const Error& e) {
    e.rethrow_with("run.label_mode");
  }
  r.seed = parse_number<std::uint64_t>("run.seed", get("run.seed"));
  r.workers = integer("run.workers");
  r.smoothing = integer("run.smoothing");
  r.validation_fraction = num("run.validation_fraction");
  r.save_models = parse_bool("run.save_models", get("run.save_models"));

  auto& w = r.windows;
  w.ecg_s = num("features.ecg_window_s");
  w.bvp_s = num("features.bvp_window_s");
  w.rsp_s = num("features.rsp_window_s");
  w.gsr_s = num("features.gsr_window_s");
  w.skt_s = num("features.skt_window_s");
  w.emg_s = num("features.emg_window_s");
  w.raw_context_halfwidth_s = num("features.context_halfwidth_s");
  w.raw_context_rate_hz = num("features.context_rate_hz");
  w.max_delay_s = num("features.max_delay_s");

  auto& e = r.ensemble;
  e.roster = parse_roster("learners.roster", get("learners.roster"));
  e.iterations = integer("learners.iterations");
  e.refit_on_all = parse_bool("learners.refit_on_all", get("learners.refit_on_all"));
  auto& p = e.params;
  p.knn_k = integer("learners.knn_k");
  p.forest_trees = integer("learners.forest_trees");
  p.forest_max_depth = integer("learners.forest_max_depth");
  p.forest_min_leaf = integer("learners.forest_min_leaf");
  p.rf_max_features = num("learners.rf_max_features");
  p.et_max_features = num("learners.et_max_features");
  p.gbt_rounds = integer("learners.gbt_rounds");
  p.gbt_max_depth = integer("learners.gbt_max_depth");
  p.gbt_min_leaf = integer("learners.gbt_min_leaf");
  p.gbt_learning_rate = num("learners.gbt_learning_rate");
  p.ridge_lambda = num("learners.ridge_lambda");
  p.max_bins = integer("learners.max_bins");

  r.data_root = get("paths.data");
  r.output_root = get("paths.output");
  try {
    r.validate();
  } catch (const Error& err) {
    throw Error(Errc::config_error, err.what());
  }
  return r;
}

corpus::SynthesisSpec Config::synthesis_spec() const {
  corpus::SynthesisSpec s;
  auto num = [&](const char* k) { return parse_number<double>(k, get(k)); };
  s.subjects = parse_number<int>("synth.subjects", get("synth.subjects"));
  s.videos = parse_number<int>("synth.videos", get("synth.videos"));
  s.duration_s = num("synth.duration_s");
  s.train_fraction = num("synth.train_fraction");
  s.gap_s = num("synth.gap_s");
  s.coupling_gain = num("synth.coupling_gain");
  s.noise_level = num("synth.noise_level");
  s.affect_sd = num("synth.affect_sd");
  s.affect_period_s = num("synth.affect_period_s");
  s.affect_damping = num("synth.affect_damping");
  s.label_lag_s = num("synth.label_lag_s");
  s.fast_valence_amplitude = num("synth.fast_valence_amplitude");
  s.fast_valence_bandwidth_hz = num("synth.fast_valence_bandwidth_hz");
  s.scenarios = parse_scenarios("synth.scenarios", get("synth.scenarios"));
  try {
    s.validate();
  } catch (const Error& err) {
    throw Error(Errc::config_error, err.what());
  }
  return s;
}

std::uint64_t Config::synthesis_seed() const { return parse_number<std::uint64_t>("synth.seed", get("synth.seed")); }

eval::LagSweepOptions Config::lag_options() const {
  eval::LagSweepOptions o;
  o.scenario = parse_scenario_value("lag.scenario", get("lag.scenario"));
  o.fold = parse_number<int>("lag.fold", get("lag.fold"));
  o.subsets = parse_list(get("lag.subsets"));
  if (o.subsets.empty()) bad_value("lag.subsets", get("lag.subsets"), "a non-empty subset list");
  for (const auto& s : o.subsets)
    if (std::find(eval::kLagSubsets.begin(), eval::kLagSubsets.end(), s) == eval::kLagSubsets.end())
      bad_value("lag.subsets", s, "a signal subset");
  o.delays.clear();
  for (const auto& d : parse_list(get("lag.delays"))) o.delays.push_back(parse_number<double>("lag.delays", d));
  if (o.delays.empty()) bad_value("lag.delays", get("lag.delays"), "a non-empty delay list");
  o.test_fraction = parse_number<double>("lag.test_fraction", get("lag.test_fraction"));
  if (!(o.test_fraction > 0.0 && o.test_fraction < 1.0)) bad_value("lag.test_fraction", get("lag.test_fraction"), "in (0, 1)");
  o.smoothing = parse_number<int>("lag.smoothing", get("lag.smoothing"));
  if (o.smoothing < 1) bad_value("lag.smoothing", get("lag.smoothing"), ">= 1");
  return o;
}

pipeline::RunConfig Config::lag_run_config() const {
  auto r = run_config();
  if (!get("lag.roster").empty()) r.ensemble.roster = parse_roster("lag.roster", get("lag.roster"));
  return r;
}

}  // namespace affectfuse::config
