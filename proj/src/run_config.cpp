#include "gpnav/run_config.hpp"
#include "gpnav/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

namespace gpnav {

void RunConfig::validate() const {
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0 && std::isfinite(*v))) throw validation_error(std::string(name) + " must be > 0");
  };
  auto non_negative = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v >= 0 && std::isfinite(*v))) throw validation_error(std::string(name) + " must be >= 0");
  };
  positive(lengthscale, "lengthscale");
  non_negative(noise_sigma, "noise_sigma");
  positive(epsilon, "epsilon");
  non_negative(lambda_s, "lambda_s");
  non_negative(lambda_o, "lambda_o");
  non_negative(lambda_g, "lambda_g");
  positive(eta, "eta");
  positive(grad_tol, "grad_tol");
  positive(min_cell, "min_cell");
  if (q && *q < 3) throw validation_error("q must be >= 3");
  if (max_iters && *max_iters < 0) throw validation_error("max_iters must be >= 0");
  if (max_depth < 1) throw validation_error("max_depth must be >= 1");
  if (max_training_points < 1) throw validation_error("max_training_points must be >= 1");
  if (trials < 1) throw validation_error("trials must be >= 1");
  if (workers < 1) throw validation_error("workers must be >= 1");
  if (prm_samples < 2) throw validation_error("prm_samples must be >= 2");
  if (prm_k < 1) throw validation_error("prm_k must be >= 1");
}

namespace {

using nlohmann::json;

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw validation_error("run config " + path + ": expected a number");
  return v.get<double>();
}

long long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw validation_error("run config " + path + ": expected an integer");
  return v.get<long long>();
}

}  // namespace

RunConfig run_config_from_json(const json& doc) {
  if (!doc.is_object()) throw validation_error("run config $: expected an object");
  RunConfig c;
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> fields = {
      {"lengthscale", [&](const json& v, const std::string& p) { c.lengthscale = number(v, p); }},
      {"noise_sigma", [&](const json& v, const std::string& p) { c.noise_sigma = number(v, p); }},
      {"seed", [&](const json& v, const std::string& p) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           throw validation_error("run config " + p + ": expected a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"epsilon", [&](const json& v, const std::string& p) { c.epsilon = number(v, p); }},
      {"lambda_s", [&](const json& v, const std::string& p) { c.lambda_s = number(v, p); }},
      {"lambda_o", [&](const json& v, const std::string& p) { c.lambda_o = number(v, p); }},
      {"lambda_g", [&](const json& v, const std::string& p) { c.lambda_g = number(v, p); }},
      {"eta", [&](const json& v, const std::string& p) { c.eta = number(v, p); }},
      {"grad_tol", [&](const json& v, const std::string& p) { c.grad_tol = number(v, p); }},
      {"q", [&](const json& v, const std::string& p) { c.q = static_cast<int>(integer(v, p)); }},
      {"max_iters", [&](const json& v, const std::string& p) { c.max_iters = static_cast<int>(integer(v, p)); }},
      {"min_cell", [&](const json& v, const std::string& p) { c.min_cell = number(v, p); }},
      {"max_depth", [&](const json& v, const std::string& p) { c.max_depth = static_cast<int>(integer(v, p)); }},
      {"max_training_points", [&](const json& v, const std::string& p) {
         const long long n = integer(v, p);
         if (n < 1) throw validation_error("run config " + p + ": must be >= 1");
         c.max_training_points = static_cast<std::size_t>(n);
       }},
      {"trials", [&](const json& v, const std::string& p) { c.trials = static_cast<int>(integer(v, p)); }},
      {"workers", [&](const json& v, const std::string& p) { c.workers = static_cast<int>(integer(v, p)); }},
      {"prm_samples", [&](const json& v, const std::string& p) { c.prm_samples = static_cast<int>(integer(v, p)); }},
      {"prm_k", [&](const json& v, const std::string& p) { c.prm_k = static_cast<int>(integer(v, p)); }},
  };
  for (const auto& [key, value] : doc.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw validation_error("run config $." + key + ": unknown key");
    it->second(value, "$." + key);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open run config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error("run config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc);
}

json run_config_to_json(const RunConfig& c) {
  json doc;
  auto put = [&](const char* key, const auto& v) {
    if (v) doc[key] = *v;
  };
  put("lengthscale", c.lengthscale);
  doc["noise_sigma"] = c.noise_sigma;
  doc["seed"] = c.seed;
  put("epsilon", c.epsilon);
  put("lambda_s", c.lambda_s);
  put("lambda_o", c.lambda_o);
  put("lambda_g", c.lambda_g);
  put("eta", c.eta);
  put("grad_tol", c.grad_tol);
  put("q", c.q);
  put("max_iters", c.max_iters);
  put("min_cell", c.min_cell);
  doc["max_depth"] = c.max_depth;
  doc["max_training_points"] = c.max_training_points;
  doc["trials"] = c.trials;
  doc["workers"] = c.workers;
  doc["prm_samples"] = c.prm_samples;
  doc["prm_k"] = c.prm_k;
  return doc;
}

SceneConfig scene_config(const RunConfig& config, bool single_field) {
  SceneConfig s;
  s.ground_fit.lengthscale = config.lengthscale;
  s.obstacle_fit.lengthscale = config.lengthscale;
  s.single_fit.lengthscale = config.lengthscale;
  s.min_cell = config.min_cell;
  s.max_depth = config.max_depth;
  s.max_training_points = config.max_training_points;
  s.build_single_field = single_field;
  return s;
}

ChompConfig chomp_config(const RunConfig& config, const SystemModel& system) {
  ChompConfig c = default_chomp_config(system.height, system.radius, config.q.value_or(50));
  if (config.epsilon) c.epsilon = *config.epsilon;
  if (config.lambda_s) c.lambda_s = *config.lambda_s;
  if (config.lambda_o) c.lambda_o = *config.lambda_o;
  if (config.lambda_g) c.lambda_g = *config.lambda_g;
  if (config.eta) c.eta = *config.eta;
  if (config.grad_tol) c.grad_tol = *config.grad_tol;
  if (config.max_iters) c.max_iters = *config.max_iters;
  c.validate();
  return c;
}

PlannerConfig planner_config(const RunConfig& config, const SystemModel& system) {
  PlannerConfig p;
  p.chomp = chomp_config(config, system);
  p.prm.n_samples = config.prm_samples;
  p.prm.k_neighbors = config.prm_k;
  return p;
}

namespace {

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    double v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v))
      throw validation_error("'" + text + "' is not a comma-separated list of numbers");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

}  // namespace

SystemModel parse_system(const std::string& text) {
  if (text.find(',') == std::string::npos) return SystemModel::preset(text);
  const auto v = parse_numbers(text);
  if (v.size() != 2) throw validation_error("system must be a preset name or 'height,radius'");
  SystemModel s{"custom", v[0], v[1]};
  s.validate();
  return s;
}

std::vector<double> parse_point(const std::string& text) {
  auto v = parse_numbers(text);
  if (v.size() != 2 && v.size() != 3) throw validation_error("point '" + text + "' must be 'x,y' or 'x,y,z'");
  return v;
}

}  // namespace gpnav
