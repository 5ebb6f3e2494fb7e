#pragma once

// Text formats for batches, traces and score reports.
//
//   batch CSV:   chain,u,v,round,z0,...,z{d-1}       (one row per outlier)
//   trace JSONL: {"chain","u","v","round","alpha","h_init","h_prop",
//                 "mh_accept","margin_pass","accepted","retries"}
//   report CSV:  metric,value
//
// Reals are printed with 17 significant digits so files round-trip exactly.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hamos/energy.hpp"
#include "hamos/error.hpp"
#include "hamos/metrics.hpp"
#include "hamos/samplers.hpp"
#include "hamos/synthesis.hpp"

namespace hamos {

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// JSON has no inf/nan; they are written as null.
inline nlohmann::json json_real(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

constexpr std::string_view to_string(GradientMode m) {
  return m == GradientMode::Scaled ? "scaled" : "analytic";
}

inline GradientMode parse_gradient_mode(std::string_view s) {
  if (s == "scaled") return GradientMode::Scaled;
  if (s == "analytic") return GradientMode::Analytic;
  throw Error(ErrorKind::BadConfig, "unknown gradient mode '" + std::string(s) + "'");
}

inline nlohmann::json to_json(const HmcConfig& c) {
  return {{"L", c.leapfrog_steps},
          {"epsilon", c.step_size},
          {"R", c.rounds},
          {"variant", std::string(to_string(c.variant))},
          {"seed", c.seed},
          {"J", c.history_window},
          {"gradient", std::string(to_string(c.gradient))}};
}

inline HmcConfig hmc_config_from_json(const nlohmann::json& j, HmcConfig c = {}) {
  if (j.contains("L")) c.leapfrog_steps = j.at("L").get<int>();
  if (j.contains("epsilon")) c.step_size = j.at("epsilon").get<double>();
  if (j.contains("R")) c.rounds = j.at("R").get<int>();
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("J")) c.history_window = j.at("J").get<int>();
  if (j.contains("gradient")) c.gradient = parse_gradient_mode(j.at("gradient").get<std::string>());
  return c;
}

inline void write_batch_csv(const OutlierBatch& batch, std::ostream& os) {
  const std::size_t d = batch.samples.empty() ? 0 : batch.samples.front().z.dim();
  os << "chain,u,v,round";
  for (std::size_t i = 0; i < d; ++i) os << ",z" << i;
  os << '\n';
  for (const auto& s : batch.samples) {
    os << s.chain << ',' << s.pair.u << ',' << s.pair.v << ',' << s.round;
    for (double x : s.z.coords()) os << ',' << format_real(x);
    os << '\n';
  }
}

inline nlohmann::json batch_to_json(const OutlierBatch& batch) {
  nlohmann::json j;
  j["config"] = to_json(batch.config);
  auto& chains = j["chains"] = nlohmann::json::array();
  for (const auto& c : batch.chains) {
    chains.push_back({{"chain", c.chain},
                      {"u", c.pair.u},
                      {"v", c.pair.v},
                      {"rank", c.adjacency_rank},
                      {"t_minus", json_real(c.t_minus)},
                      {"accepted", c.accepted},
                      {"transitions", c.transitions.size()},
                      {"skipped", c.skipped},
                      {"skip_reason", c.skip_reason}});
  }
  auto& samples = j["samples"] = nlohmann::json::array();
  for (const auto& s : batch.samples) {
    samples.push_back({{"chain", s.chain},
                       {"u", s.pair.u},
                       {"v", s.pair.v},
                       {"round", s.round},
                       {"accepted", s.accepted},
                       {"z", s.z.vec()}});
  }
  return j;
}

inline void write_trace_jsonl(const OutlierBatch& batch, std::ostream& os) {
  for (const auto& c : batch.chains) {
    for (const auto& t : c.transitions) {
      nlohmann::json j = {{"chain", c.chain},
                          {"u", c.pair.u},
                          {"v", c.pair.v},
                          {"round", t.round},
                          {"alpha", json_real(t.alpha)},
                          {"h_init", json_real(t.h_init)},
                          {"h_prop", json_real(t.h_prop)},
                          {"mh_accept", t.mh_accept},
                          {"margin_pass", t.margin_pass},
                          {"accepted", t.accepted},
                          {"retries", t.degenerate_retries}};
      os << j.dump() << '\n';
    }
  }
}

inline nlohmann::json report_to_json(const ScoreReport& r) {
  return {{"fpr95", r.fpr95},
          {"auroc", r.auroc},
          {"aupr", r.aupr},
          {"threshold", r.threshold},
          {"n_id", r.id_scores.size()},
          {"n_ood", r.ood_scores.size()}};
}

inline void write_report_csv(const ScoreReport& r, std::ostream& os) {
  os << "metric,value\n";
  os << "fpr95," << format_real(r.fpr95) << '\n';
  os << "auroc," << format_real(r.auroc) << '\n';
  os << "aupr," << format_real(r.aupr) << '\n';
  os << "threshold," << format_real(r.threshold) << '\n';
  os << "n_id," << r.id_scores.size() << '\n';
  os << "n_ood," << r.ood_scores.size() << '\n';
}

inline void write_rounds_csv(const std::vector<RoundStats>& rounds, std::ostream& os) {
  os << "round,count,mean,std,min,max\n";
  for (const auto& r : rounds) {
    os << r.round << ',' << r.count << ',' << format_real(r.mean) << ',' << format_real(r.stddev) << ','
       << format_real(r.min) << ',' << format_real(r.max) << '\n';
  }
}

}  // namespace hamos
