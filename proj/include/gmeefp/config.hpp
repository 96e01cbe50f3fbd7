#ifndef GMEEFP_CONFIG_HPP
#define GMEEFP_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmeefp/experiments.hpp"

namespace gmeefp {

struct ConfigError : Error {
  using Error::Error;
};

using Json = nlohmann::json;

/// Everything a CLI invocation needs: the campaign and an optional grid.
struct RunConfig {
  ExperimentConfig experiment;
  SweepGrid grid;
  bool has_grid = false;
};

namespace detail {

inline NoiseSpec parse_noise(const Json& j, int dim) {
  NoiseSpec spec;
  spec.dimension = dim;
  const std::string kind = j.value("kind", std::string("gaussian"));
  if (kind == "gaussian") {
    spec.kind = NoiseSpec::Kind::gaussian;
  } else if (kind == "mixture") {
    spec.kind = NoiseSpec::Kind::mixture;
  } else {
    throw ConfigError("noise kind must be 'gaussian' or 'mixture', got '" + kind + "'");
  }
  spec.components.clear();
  if (j.contains("variance")) {
    spec.components.push_back({1.0, j.at("variance").get<double>()});
  }
  for (const auto& c : j.value("components", Json::array())) {
    spec.components.push_back({c.value("weight", 1.0), c.at("variance").get<double>()});
  }
  return spec;
}

inline Json noise_to_json(const NoiseSpec& s) {
  Json comps = Json::array();
  for (const auto& c : s.components) comps.push_back({{"weight", c.weight}, {"variance", c.variance}});
  return {{"kind", s.kind == NoiseSpec::Kind::gaussian ? "gaussian" : "mixture"},
          {"components", comps}};
}

inline void apply_params(const Json& j, GmeefpParams& p) {
  p.alpha1 = j.value("alpha1", p.alpha1);
  p.beta1 = j.value("beta1", p.beta1);
  p.alpha2 = j.value("alpha2", p.alpha2);
  p.beta2 = j.value("beta2", p.beta2);
  p.lambda = j.value("lambda", p.lambda);
  p.tau = j.value("tau", p.tau);
  p.max_iter = j.value("max_iter", p.max_iter);
  if (j.contains("weighting_form")) {
    const auto w = j.at("weighting_form").get<std::string>();
    if (w == "omega_paper") {
      p.weighting_form = WeightingForm::omega_paper;
    } else if (w == "lambda_derivative") {
      p.weighting_form = WeightingForm::lambda_derivative;
    } else {
      throw ConfigError("weighting_form must be omega_paper or lambda_derivative");
    }
  }
  if (j.contains("residual_cov_sign")) {
    const auto s = j.at("residual_cov_sign").get<std::string>();
    if (s == "schur_minus") {
      p.residual_cov_sign = ResidualCovSign::schur_minus;
    } else if (s == "paper_plus") {
      p.residual_cov_sign = ResidualCovSign::paper_plus;
    } else {
      throw ConfigError("residual_cov_sign must be schur_minus or paper_plus");
    }
  }
}

inline Json params_to_json(const GmeefpParams& p) {
  return {{"alpha1", p.alpha1},
          {"beta1", p.beta1},
          {"alpha2", p.alpha2},
          {"beta2", p.beta2},
          {"lambda", p.lambda},
          {"tau", p.tau},
          {"max_iter", p.max_iter},
          {"weighting_form",
           p.weighting_form == WeightingForm::omega_paper ? "omega_paper" : "lambda_derivative"},
          {"residual_cov_sign",
           p.residual_cov_sign == ResidualCovSign::schur_minus ? "schur_minus" : "paper_plus"}};
}

inline FilterSpec parse_filter(const Json& j) {
  const std::string pre = j.value("preset", std::string("gmeefp"));
  FilterSpec f = make_filter(j.value("name", pre), pre);
  if (j.contains("params")) {
    apply_params(j.at("params"), f.params);
    // Explicit parameters mean the robust recursion, even for the ckf preset.
    f.plain_ckf = false;
  }
  f.plain_ckf = j.value("plain_ckf", f.plain_ckf);
  return f;
}

inline std::vector<double> axis(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return {fallback};
  return j.at(key).get<std::vector<double>>();
}

}  // namespace detail

/// Parses a campaign description. Missing fields keep the scenario defaults;
/// a missing filter list means the four compared filters.
inline RunConfig parse_config(const Json& j) {
  RunConfig rc;
  ExperimentConfig& cfg = rc.experiment;
  cfg = tracking_scenario();
  try {
    if (j.contains("model")) {
      const Json& m = j.at("model");
      cfg.dt = m.value("dt", cfg.dt);
      cfg.q_var = m.value("q_var", cfg.q_var);
      cfg.r_nominal = m.value("r_nominal", cfg.r_nominal);
    }
    cfg.process = j.contains("process_noise") ? detail::parse_noise(j.at("process_noise"), 4)
                                              : NoiseSpec::gaussian(4, cfg.q_var);
    if (j.contains("measurement_noise")) {
      cfg.measurement = detail::parse_noise(j.at("measurement_noise"), 2);
    }
    if (j.contains("x0")) {
      const auto v = j.at("x0").get<std::vector<double>>();
      cfg.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    cfg.init_var = j.value("init_var", cfg.init_var);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.runs = j.value("runs", cfg.runs);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.steady_window = j.value("steady_window", cfg.steady_window);
    const std::string agg = j.value("aggregate", std::string("sq_then_db"));
    if (agg == "sq_then_db") {
      cfg.aggregate = Aggregate::sq_then_db;
    } else if (agg == "db_then_mean") {
      cfg.aggregate = Aggregate::db_then_mean;
    } else {
      throw ConfigError("aggregate must be sq_then_db or db_then_mean");
    }
    if (j.contains("filters")) {
      cfg.filters.clear();
      for (const auto& f : j.at("filters")) cfg.filters.push_back(detail::parse_filter(f));
    }
    if (j.contains("sweep")) {
      const Json& s = j.at("sweep");
      GmeefpParams base = preset(s.value("preset", std::string("gmeefp")));
      if (s.contains("params")) detail::apply_params(s.at("params"), base);
      rc.grid = SweepGrid::product(base, detail::axis(s, "alpha2", base.alpha2),
                                   detail::axis(s, "beta2", base.beta2),
                                   detail::axis(s, "lambda", base.lambda));
      rc.has_grid = true;
      for (const auto& pt : rc.grid.points) {
        GmeefpParams p = base;
        p.alpha2 = pt.alpha2;
        p.beta2 = pt.beta2;
        p.lambda = pt.lambda;
        p.validate();
      }
    }
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return parse_config(Json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

/// Canonical, fully resolved form of a config (used for hashing).
inline Json config_to_json(const RunConfig& rc) {
  const ExperimentConfig& c = rc.experiment;
  Json filters = Json::array();
  for (const auto& f : c.filters) {
    filters.push_back(
        {{"name", f.name}, {"plain_ckf", f.plain_ckf}, {"params", detail::params_to_json(f.params)}});
  }
  Json j = {{"model", {{"dt", c.dt}, {"q_var", c.q_var}, {"r_nominal", c.r_nominal}}},
            {"process_noise", detail::noise_to_json(c.process)},
            {"measurement_noise", detail::noise_to_json(c.measurement)},
            {"x0", std::vector<double>(c.x0.data(), c.x0.data() + c.x0.size())},
            {"init_var", c.init_var},
            {"steps", c.steps},
            {"runs", c.runs},
            {"master_seed", c.master_seed},
            {"steady_window", c.steady_window},
            {"aggregate", c.aggregate == Aggregate::sq_then_db ? "sq_then_db" : "db_then_mean"},
            {"filters", filters}};
  if (rc.has_grid) {
    Json pts = Json::array();
    for (const auto& p : rc.grid.points) {
      pts.push_back({{"alpha2", p.alpha2}, {"beta2", p.beta2}, {"lambda", p.lambda}});
    }
    j["sweep"] = {{"base", detail::params_to_json(rc.grid.base)}, {"points", pts}};
  }
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const RunConfig& rc) {
  std::ostringstream os;
  os << std::hex << fnv1a(config_to_json(rc).dump());
  return os.str();
}

}  // namespace gmeefp

#endif  // GMEEFP_CONFIG_HPP
