#pragma once

// Channel files, rate lists, number formatting and result files.
//
// Channel file:
//   # comment
//   dmc <|X|> <|Y|>
//   <|Y| probabilities>   (one line per input symbol)

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "explab/duals.hpp"
#include "explab/exponents.hpp"
#include "explab/prob.hpp"
#include "explab/simulator.hpp"

namespace explab::io {

inline constexpr const char* kFormatVersion = "explab-results/1";
inline constexpr int kSignificantDigits = 9;

// Rows are renormalized when their sum is within 1e-9 of 1 and rejected otherwise.
Channel parse_channel(std::string_view text, std::string name = {});
Channel load_channel(const std::string& path);
// Shortest round-trip decimals, so parsing the output reproduces every entry.
std::string serialize_channel(const Channel& ch);

// "start:stop:step" (inclusive of stop within 1e-9 of a step) or "r1,r2,...".
std::vector<double> parse_rates(std::string_view spec);
// "0.5,0.5" style composition.
Dist parse_dist(std::string_view spec);

double parse_double(std::string_view token);

// %.9g; "+inf" / "-inf" / "nan" for non-finite values.
std::string format_number(double v);
// The value rounded to 9 significant digits, or the "+inf" / "-inf" string.
nlohmann::json json_number(double v);

nlohmann::json to_json(const Dist& d);
nlohmann::json to_json(const Joint2& j);
nlohmann::json to_json(const CondDist& c);
nlohmann::json to_json(const Channel& ch);
nlohmann::json to_json(const OptimizerOptions& o);
nlohmann::json to_json(const ExponentResult& r);
nlohmann::json to_json(const DualValue& d);
nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const Lemma3Report& r);
nlohmann::json to_json(const ErrorProfile& p);
nlohmann::json to_json(const TrialSummary& t);

// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::string& path, std::string_view content);

}  // namespace explab::io
