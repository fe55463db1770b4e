#pragma once

#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trapk/disorder.hpp"
#include "trapk/k_process.hpp"
#include "trapk/rng.hpp"
#include "trapk/stats.hpp"

namespace trapk {

using json = nlohmann::json;

inline json to_json(const RngSpec& r) {
  return {{"master_seed", r.master_seed}, {"replica_index", r.replica_index}, {"stream", r.stream}};
}

// GammaMeasure <-> JSON array of weights

inline json gamma_to_json(const GammaMeasure& g) { return json(std::vector<double>(g.weights().begin(), g.weights().end())); }

/// Parses a non-increasing array of positive weights; throws on anything else.
inline GammaMeasure gamma_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("gamma must be a JSON array of weights");
  std::vector<double> w;
  w.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument("gamma weights must be numbers");
    w.push_back(v.get<double>());
  }
  return GammaMeasure(std::move(w));
}

// ScaledEnvironment export

inline json environment_to_json(const ScaledEnvironment& env, std::size_t top_k) {
  json j;
  j["kind"] = env.spec.is_pareto() ? "rem-like" : "rem";
  j["d"] = env.spec.d;
  if (env.spec.is_pareto()) {
    j["alpha"] = env.spec.alpha();
  } else {
    j["beta"] = std::get<RemGaussian>(env.spec.kind).beta;
    j["alpha"] = env.spec.alpha();
  }
  j["c_d"] = env.c_d;
  const std::size_t k = std::min(top_k, env.scaled_means.size());
  j["top_scaled_means"] = std::vector<double>(env.scaled_means.begin(), env.scaled_means.begin() + static_cast<std::ptrdiff_t>(k));
  j["seed"] = to_json(env.seed);
  return j;
}

/// All 2^d scaled means in rank order as little-endian IEEE-754 doubles.
inline void write_means_binary(std::ostream& os, std::span<const double> means) {
  static_assert(std::numeric_limits<double>::is_iec559);
  for (double m : means) {
    std::uint64_t bits;
    std::memcpy(&bits, &m, sizeof bits);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(bytes, 8);
  }
}

inline std::vector<double> read_means_binary(std::istream& is) {
  std::vector<double> out;
  unsigned char bytes[8];
  while (is.read(reinterpret_cast<char*>(bytes), 8)) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
    double m;
    std::memcpy(&m, &bits, sizeof m);
    out.push_back(m);
  }
  return out;
}

// CSV

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

/// Header `theta,estimate,ci_half_width,n,theory_R`, one row per theta.
inline void write_aging_csv(std::ostream& os, const AgingCurve& curve) {
  os << "theta,estimate,ci_half_width,n,theory_R\n";
  for (std::size_t i = 0; i < curve.theta_values.size(); ++i) {
    const auto& e = curve.estimates[i];
    os << format_double(curve.theta_values[i]) << ',' << format_double(e.point) << ','
       << format_double(e.half_width) << ',' << e.n << ',' << format_double(curve.theory[i]) << "\n";
  }
}

inline json estimate_to_json(const EstimateWithCI& e) {
  return {{"point", e.point}, {"half_width", e.half_width}, {"n", e.n}, {"seed", to_json(e.seed)}};
}

}  // namespace trapk
