#pragma once

// File formats and serialization. Parsing uses nlohmann::json; emission is a
// small hand-rolled writer so output bytes are fully under our control:
// object keys in documented order, floats as printf %.16e (17 significant
// digits, round-trips exactly), no locale dependence. Byte-identical output
// for identical inputs is a hard requirement; nothing time- or
// thread-dependent may reach a serializer.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "permapprox/common.hpp"
#include "permapprox/model.hpp"
#include "permapprox/oracle.hpp"
#include "permapprox/real_valued.hpp"
#include "permapprox/solver.hpp"
#include "permapprox/tsp.hpp"

namespace permapprox {

// ---------------------------------------------------------------------------
// Emission primitives.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

// Finite numbers as %.16e; non-finite (impossible log scores) as null.
inline std::string json_number(double v) {
  if (!std::isfinite(v)) return "null";
  return format_double(v);
}

inline std::string json_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

namespace detail {
template <typename T, typename Fn>
std::string json_array(const std::vector<T>& items, Fn to_str) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += to_str(items[i]);
  }
  out += "]";
  return out;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Model / trail / bundle serialization.
// ---------------------------------------------------------------------------

inline std::string model_to_json(const TppModel& model) {
  std::string out = "{\"states\":";
  out += detail::json_array(model.states, [](const std::string& s) { return json_string(s); });
  out += ",\"emissions\":{";
  for (std::size_t i = 0; i < model.states.size(); ++i) {
    if (i) out += ",";
    out += json_string(model.states[i]);
    out += ":{";
    bool first = true;
    for (const auto& [token, p] : model.emissions[i]) {
      if (!first) out += ",";
      first = false;
      out += json_string(token);
      out += ":";
      out += json_number(p);
    }
    out += "}";
  }
  out += "},\"transitions\":";
  out += detail::json_array(model.transitions, [](const std::vector<double>& row) {
    return detail::json_array(row, [](double v) { return json_number(v); });
  });
  out += "}";
  return out;
}

inline std::string real_model_to_json(const TppRealModel& model) {
  std::string out = "{\"states\":";
  out += detail::json_array(model.states, [](const std::string& s) { return json_string(s); });
  out += ",\"real_emissions\":";
  out += detail::json_array(model.dists, [](const std::vector<RealDist>& row) {
    return detail::json_array(row, [](const RealDist& d) {
      if (d.kind == RealDist::Kind::kGaussian)
        return std::string("{\"kind\":\"gaussian\",\"mean\":") + json_number(d.mean) +
               ",\"std\":" + json_number(d.std) + "}";
      return std::string("{\"kind\":\"samples\",\"samples\":") +
             detail::json_array(d.samples, [](double v) { return json_number(v); }) + "}";
    });
  });
  out += ",\"transitions\":";
  out += detail::json_array(model.transitions, [](const std::vector<double>& row) {
    return detail::json_array(row, [](double v) { return json_number(v); });
  });
  out += "}";
  return out;
}

inline std::string trail_to_json(const ObservationTrail& trail) {
  if (trail.real_valued())
    return std::string("{\"episodes_real\":") +
           detail::json_array(trail.episodes_real,
                              [](const std::vector<double>& ep) {
                                return detail::json_array(
                                    ep, [](double v) { return json_number(v); });
                              }) +
           "}";
  return std::string("{\"episodes\":") +
         detail::json_array(trail.episodes,
                            [](const std::vector<std::string>& ep) {
                              return detail::json_array(ep, [](const std::string& t) {
                                return json_string(t);
                              });
                            }) +
         "}";
}

// Instance bundle: model + trail (+ ground truth as state names).
inline std::string bundle_to_json(const Instance& inst) {
  std::string out = "{\"model\":";
  out += model_to_json(inst.model);
  out += ",\"trail\":";
  out += trail_to_json(inst.trail);
  if (!inst.ground_truth.empty()) {
    out += ",\"ground_truth\":";
    out += detail::json_array(inst.ground_truth, [&](int s) {
      return json_string(inst.model.states[static_cast<std::size_t>(s)]);
    });
  }
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Result serialization.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string arrangement_names(const StateArrangement& arr,
                                     const std::vector<std::string>& states) {
  return json_array(arr, [&](int s) { return json_string(states[static_cast<std::size_t>(s)]); });
}
}  // namespace detail

inline std::string solve_result_to_json(const SolveResult& result,
                                        const std::vector<std::string>& states) {
  std::string out = "{\"feasible\":";
  out += result.feasible ? "true" : "false";
  out += ",\"best\":";
  out += detail::arrangement_names(result.best, states);
  out += ",\"log_score\":";
  out += json_number(result.score.value);
  out += ",\"scored\":" + std::to_string(result.scored_total);
  out += ",\"pruned\":" + std::to_string(result.pruned_total);
  out += ",\"vote_fallback\":";
  out += result.vote_fallback ? "true" : "false";
  out += ",\"votes\":";
  out += detail::json_array(result.votes, [&](const std::map<int, int>& tally) {
    std::string t = "{";
    bool first = true;
    for (const auto& [state, count] : tally) {
      if (!first) t += ",";
      first = false;
      t += json_string(states[static_cast<std::size_t>(state)]);
      t += ":" + std::to_string(count);
    }
    t += "}";
    return t;
  });
  out += ",\"repetitions\":";
  out += detail::json_array(result.reps, [&](const RepOutcome& rep) {
    std::string r = "{\"feasible\":";
    r += rep.feasible ? "true" : "false";
    r += ",\"arrangement\":";
    r += detail::arrangement_names(rep.arrangement, states);
    r += ",\"log_score\":";
    r += json_number(rep.score.value);
    r += ",\"must_traverse\":";
    r += detail::arrangement_names(rep.must_traverse, states);
    r += ",\"scored\":" + std::to_string(rep.scored);
    r += ",\"pruned\":" + std::to_string(rep.pruned);
    r += "}";
    return r;
  });
  out += "}\n";
  return out;
}

inline std::string oracle_result_to_json(const OracleResult& result,
                                         const std::vector<std::string>& states) {
  std::string out = "{\"feasible\":";
  out += result.feasible ? "true" : "false";
  out += ",\"best\":";
  out += detail::arrangement_names(result.best, states);
  out += ",\"log_score\":";
  out += json_number(result.score.value);
  out += ",\"scored\":" + std::to_string(result.scored);
  out += "}\n";
  return out;
}

inline std::string tsp_result_to_json(const Tour& tour, double length,
                                      std::optional<double> optimal_length,
                                      std::optional<double> approx_factor) {
  std::string out = "{\"tour\":";
  out += detail::json_array(tour.nodes, [](int n) { return std::to_string(n); });
  out += ",\"length\":";
  out += json_number(length);
  if (optimal_length) {
    out += ",\"optimal_length\":";
    out += json_number(*optimal_length);
  }
  if (approx_factor) {
    out += ",\"approx_factor\":";
    out += json_number(*approx_factor);
  }
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Parsing.
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << content;
  if (!out) throw InputError(path + ": write failed");
}

inline bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

namespace detail {
inline nlohmann::json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": parse error at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
}

inline double require_number(const nlohmann::json& j, const std::string& path,
                             const std::string& what) {
  if (!j.is_number()) throw InputError(path + ": " + what + " must be a number");
  return j.get<double>();
}
}  // namespace detail

struct Bundle {
  std::optional<TppModel> model;
  std::optional<TppRealModel> real_model;
  ObservationTrail trail;
  StateArrangement ground_truth;  // empty when absent
};

inline TppModel model_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("states") || !j.contains("emissions") ||
      !j.contains("transitions"))
    throw InputError(path + ": model requires states, emissions and transitions");
  TppModel model;
  for (const auto& s : j.at("states")) {
    if (!s.is_string()) throw InputError(path + ": state names must be strings");
    model.states.push_back(s.get<std::string>());
  }
  model.emissions.resize(model.states.size());
  const auto& em = j.at("emissions");
  if (!em.is_object()) throw InputError(path + ": emissions must be an object");
  for (std::size_t i = 0; i < model.states.size(); ++i) {
    if (!em.contains(model.states[i]))
      throw InputError(path + ": emissions missing state '" + model.states[i] + "'");
    for (const auto& [token, p] : em.at(model.states[i]).items())
      model.emissions[i][token] =
          detail::require_number(p, path, "emission probability of '" + token + "'");
  }
  for (const auto& row : j.at("transitions")) {
    std::vector<double> r;
    for (const auto& v : row) r.push_back(detail::require_number(v, path, "transition"));
    model.transitions.push_back(std::move(r));
  }
  return model;
}

inline TppRealModel real_model_from_json(const nlohmann::json& j, const std::string& path) {
  TppRealModel model;
  for (const auto& s : j.at("states")) model.states.push_back(s.get<std::string>());
  for (const auto& row : j.at("real_emissions")) {
    std::vector<RealDist> dists;
    for (const auto& d : row) {
      const std::string kind = d.value("kind", "gaussian");
      if (kind == "gaussian") {
        dists.push_back(RealDist::gaussian(
            detail::require_number(d.at("mean"), path, "gaussian mean"),
            detail::require_number(d.at("std"), path, "gaussian std")));
      } else if (kind == "samples") {
        std::vector<double> samples;
        for (const auto& v : d.at("samples"))
          samples.push_back(detail::require_number(v, path, "sample"));
        dists.push_back(RealDist::empirical(std::move(samples)));
      } else {
        throw InputError(path + ": unknown distribution kind '" + kind + "'");
      }
    }
    model.dists.push_back(std::move(dists));
  }
  for (const auto& row : j.at("transitions")) {
    std::vector<double> r;
    for (const auto& v : row) r.push_back(detail::require_number(v, path, "transition"));
    model.transitions.push_back(std::move(r));
  }
  return model;
}

inline ObservationTrail trail_from_json(const nlohmann::json& j, const std::string& path) {
  ObservationTrail trail;
  if (j.contains("episodes_real")) {
    for (const auto& ep : j.at("episodes_real")) {
      std::vector<double> values;
      for (const auto& v : ep)
        values.push_back(detail::require_number(v, path, "real observation"));
      trail.episodes_real.push_back(std::move(values));
    }
    return trail;
  }
  if (!j.contains("episodes"))
    throw InputError(path + ": trail requires episodes or episodes_real");
  for (const auto& ep : j.at("episodes")) {
    std::vector<std::string> tokens;
    for (const auto& t : ep) {
      if (!t.is_string()) throw InputError(path + ": episode tokens must be strings");
      tokens.push_back(t.get<std::string>());
    }
    trail.episodes.push_back(dedup_episode(tokens));
  }
  return trail;
}

// Loads a bundle file ({"model":..., "trail":..., "ground_truth":...}) or a
// bare model/trail file. Discrete vs real-valued is detected by the presence
// of "real_emissions".
inline Bundle load_bundle(const std::string& path) {
  const nlohmann::json j = detail::parse_json_file(path);
  Bundle bundle;
  const nlohmann::json& model_json = j.contains("model") ? j.at("model") : j;
  if (model_json.is_object() && model_json.contains("real_emissions"))
    bundle.real_model = real_model_from_json(model_json, path);
  else if (model_json.is_object() && model_json.contains("states"))
    bundle.model = model_from_json(model_json, path);

  if (j.contains("trail"))
    bundle.trail = trail_from_json(j.at("trail"), path);
  else if (j.contains("episodes") || j.contains("episodes_real"))
    bundle.trail = trail_from_json(j, path);

  if (j.contains("ground_truth")) {
    if (!bundle.model && !bundle.real_model)
      throw InputError(path + ": ground_truth requires a model");
    const auto& states = bundle.model ? bundle.model->states : bundle.real_model->states;
    for (const auto& name : j.at("ground_truth")) {
      const std::string s = name.get<std::string>();
      int idx = -1;
      for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == s) idx = static_cast<int>(i);
      if (idx < 0) throw InputError(path + ": ground_truth names unknown state '" + s + "'");
      bundle.ground_truth.push_back(idx);
    }
  }
  return bundle;
}

// Cost matrix file: {"n":N,"costs":[[...]]} or {"points":[[x,y],...]}.
inline CostMatrix load_costs(const std::string& path) {
  const nlohmann::json j = detail::parse_json_file(path);
  if (j.contains("points")) {
    std::vector<std::array<double, 2>> points;
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2)
        throw InputError(path + ": each point must be [x, y]");
      points.push_back({detail::require_number(p[0], path, "point x"),
                        detail::require_number(p[1], path, "point y")});
    }
    if (points.size() < 2) throw InputError(path + ": need at least 2 points");
    return euclidean_costs(points);
  }
  if (!j.contains("costs")) throw InputError(path + ": expected costs or points");
  CostMatrix cost;
  for (const auto& row : j.at("costs")) {
    std::vector<double> r;
    for (const auto& v : row) r.push_back(detail::require_number(v, path, "cost"));
    cost.push_back(std::move(r));
  }
  if (j.contains("n") &&
      j.at("n").get<std::size_t>() != cost.size())
    throw InputError(path + ": declared n does not match costs dimension");
  const auto violations = validate_cost_matrix(cost);
  if (!violations.empty()) throw InputError(path + ": " + violations.front());
  return cost;
}

// ---------------------------------------------------------------------------
// CSV.
// ---------------------------------------------------------------------------

// CSV floats: 9 significant digits, plenty for plotting and stable bytes.
inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace permapprox
