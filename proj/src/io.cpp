#include "explab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace explab::io {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t parse_size(std::string_view token, std::size_t line) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || p != token.data() + token.size() || v == 0)
    throw Error("line " + std::to_string(line) + ": bad alphabet size '" + std::string(token) + "'");
  return v;
}

json matrix_json(std::span<const double> p, std::size_t rows, std::size_t cols) {
  json m = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(json_number(p[r * cols + c]));
    m.push_back(std::move(row));
  }
  return m;
}

json checks_json(const std::vector<Check>& checks) {
  json a = json::array();
  for (const auto& c : checks) {
    json o{{"name", c.name}, {"margin", json_number(c.margin)}, {"tol", json_number(c.tol)},
           {"passed", c.passed}};
    if (!c.note.empty()) o["note"] = c.note;
    a.push_back(std::move(o));
  }
  return a;
}

json margins_json(const CouplingMargins& m) {
  return json{{"coupling", to_json(m.coupling)},
              {"psi", json_number(m.psi)},
              {"theta", json_number(m.theta)},
              {"lambda", json_number(m.lambda)},
              {"phi", json_number(m.phi)},
              {"lambda_minus_psi", json_number(m.lambda_minus_psi)},
              {"phi_minus_theta", json_number(m.phi_minus_theta)},
              {"unbounded", m.unbounded}};
}

}  // namespace

double parse_double(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || p != token.data() + token.size() || token.empty())
    throw Error("bad number '" + std::string(token) + "'");
  return v;
}

Channel parse_channel(std::string_view text, std::string name) {
  std::size_t nx = 0, ny = 0;
  bool header = false;
  std::vector<Dist> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (!header) {
      if (tokens.size() != 3 || tokens[0] != "dmc")
        throw Error("line " + std::to_string(line_no) + ": expected 'dmc <|X|> <|Y|>'");
      nx = parse_size(tokens[1], line_no);
      ny = parse_size(tokens[2], line_no);
      header = true;
      continue;
    }
    if (rows.size() == nx)
      throw Error("line " + std::to_string(line_no) + ": more than " + std::to_string(nx) + " rows");
    if (tokens.size() != ny)
      throw Error("line " + std::to_string(line_no) + ": row " + std::to_string(rows.size()) +
                  " has " + std::to_string(tokens.size()) + " entries, expected " +
                  std::to_string(ny));
    std::vector<double> p(ny);
    double sum = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
      try {
        p[y] = parse_double(tokens[y]);
      } catch (const Error& e) {
        throw Error("line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!(p[y] >= 0.0) || !std::isfinite(p[y]))
        throw Error("row " + std::to_string(rows.size()) + " has a negative or non-finite entry");
      sum += p[y];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os.precision(12);
      os << "row " << rows.size() << " sums to " << sum << ", not 1";
      throw Error(os.str());
    }
    for (double& v : p) v /= sum;
    rows.emplace_back(std::move(p));
  }
  if (!header) throw Error("missing 'dmc <|X|> <|Y|>' header");
  if (rows.size() != nx)
    throw Error("expected " + std::to_string(nx) + " rows, found " + std::to_string(rows.size()));
  return Channel(CondDist(std::move(rows)), std::move(name));
}

Channel load_channel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open channel file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_channel(ss.str(), std::filesystem::path(path).stem().string());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string serialize_channel(const Channel& ch) {
  std::string out = "dmc " + std::to_string(ch.inputs()) + " " + std::to_string(ch.outputs()) + "\n";
  char buf[64];
  for (std::size_t x = 0; x < ch.inputs(); ++x) {
    for (std::size_t y = 0; y < ch.outputs(); ++y) {
      const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, ch(x, y));
      if (y) out += ' ';
      out.append(buf, p);
    }
    out += '\n';
  }
  return out;
}

std::vector<double> parse_rates(std::string_view spec) {
  spec = trim(spec);
  if (spec.empty()) throw Error("empty rate list");
  std::vector<double> rates;
  if (spec.find(':') != std::string_view::npos) {
    const auto a = spec.find(':');
    const auto b = spec.find(':', a + 1);
    if (b == std::string_view::npos || spec.find(':', b + 1) != std::string_view::npos)
      throw Error("rate range must be start:stop:step");
    const double start = parse_double(spec.substr(0, a));
    const double stop = parse_double(spec.substr(a + 1, b - a - 1));
    const double step = parse_double(spec.substr(b + 1));
    if (!(step > 0.0)) throw Error("rate step must be positive");
    if (stop < start) throw Error("rate range stop is below start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) rates.push_back(start + static_cast<double>(i) * step);
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      auto end = spec.find(',', pos);
      if (end == std::string_view::npos) end = spec.size();
      rates.push_back(parse_double(spec.substr(pos, end - pos)));
      pos = end + 1;
    }
  }
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0) || !std::isfinite(rates[i])) throw Error("rates must be finite and nonnegative");
    if (i > 0 && rates[i] <= rates[i - 1]) throw Error("rates must be strictly increasing");
  }
  return rates;
}

Dist parse_dist(std::string_view spec) {
  std::vector<double> p;
  std::size_t pos = 0;
  spec = trim(spec);
  while (pos <= spec.size()) {
    auto end = spec.find(',', pos);
    if (end == std::string_view::npos) end = spec.size();
    p.push_back(parse_double(spec.substr(pos, end - pos)));
    pos = end + 1;
  }
  return Dist(std::move(p));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", kSignificantDigits, v);
  return buf;
}

json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return std::stod(format_number(v));
}

json to_json(const Dist& d) {
  json a = json::array();
  for (double v : d.probs()) a.push_back(json_number(v));
  return a;
}

json to_json(const Joint2& j) { return matrix_json(j.probs(), j.rows(), j.cols()); }

json to_json(const CondDist& c) {
  json a = json::array();
  for (const auto& row : c.rows()) a.push_back(to_json(row));
  return a;
}

json to_json(const Channel& ch) {
  return json{{"name", ch.name()},
              {"inputs", ch.inputs()},
              {"outputs", ch.outputs()},
              {"matrix", to_json(ch.matrix())}};
}

json to_json(const OptimizerOptions& o) {
  return json{{"grid_k", o.grid_k},
              {"outer_k", o.outer_k},
              {"refine_iters", o.refine_iters},
              {"refine_shrink", json_number(o.refine_shrink)},
              {"constraint_slack", json_number(o.constraint_slack)},
              {"value_tol", json_number(o.value_tol)},
              {"budget_cap", o.budget_cap},
              {"threshold_levels", o.threshold_levels},
              {"restarts", o.restarts}};
}

json to_json(const ExponentResult& r) {
  const auto& d = r.diagnostics;
  json o{{"value", json_number(r.value)},
         {"raw_value", json_number(r.raw_value)},
         {"argmin_coupling", to_json(r.argmin_coupling)},
         {"argmin_channel", to_json(r.argmin_channel)},
         {"diagnostics",
          {{"grid_points", d.grid_points},
           {"grid_feasible", d.grid_feasible},
           {"evaluations", d.evaluations},
           {"final_slack", json_number(d.final_slack)},
           {"boundary_distance", json_number(d.boundary_distance)},
           {"threshold", json_number(d.threshold)},
           {"feasible", d.feasible}}}};
  if (!d.note.empty()) o["diagnostics"]["note"] = d.note;
  if (std::isinf(r.value)) o["reason"] = d.note.empty() ? "no feasible point found" : d.note;
  return o;
}

json to_json(const DualValue& d) {
  json o{{"value", json_number(d.value)},
         {"unbounded", d.unbounded},
         {"params",
          {{"rho", json_number(d.params.rho)},
           {"sigma", json_number(d.params.sigma)},
           {"tau", json_number(d.params.tau)},
           {"mu", json_number(d.params.mu)},
           {"s", json_number(d.params.s)}}}};
  if (!d.reason.empty() || std::isinf(d.value))
    o["reason"] = d.reason.empty() ? "unbounded" : d.reason;
  return o;
}

json to_json(const BoundReport& r) {
  json o{{"rate", json_number(r.rate)},
         {"composition", to_json(r.composition)},
         {"psi", to_json(r.psi)},
         {"theta", to_json(r.theta)},
         {"lambda", to_json(r.lambda)},
         {"phi", to_json(r.phi)},
         {"ml_coupling", to_json(r.ml_coupling)},
         {"mmi_coupling", to_json(r.mmi_coupling)},
         {"ml_upper", json_number(r.ml_upper)},
         {"mmi_lower", json_number(r.mmi_lower)},
         {"ml_upper_unbounded", r.ml_upper_unbounded},
         {"mmi_lower_unbounded", r.mmi_lower_unbounded},
         {"has_primal", r.has_primal},
         {"lambda_minus_psi", json_number(r.lambda_minus_psi)},
         {"phi_minus_theta", json_number(r.phi_minus_theta)},
         {"mmi_minus_ml", json_number(r.mmi_minus_ml)},
         {"checks", checks_json(r.checks)},
         {"passed", r.passed()}};
  if (r.has_primal) {
    o["trc_ml"] = json_number(r.trc_ml);
    o["trc_mmi"] = json_number(r.trc_mmi);
  }
  if (r.ml_upper_unbounded || r.mmi_lower_unbounded) o["reason"] = "dual bound unbounded";
  json pc = json::array();
  for (const auto& m : r.per_coupling) pc.push_back(margins_json(m));
  o["per_coupling"] = std::move(pc);
  return o;
}

json to_json(const Lemma3Report& r) {
  json per = json::array();
  for (std::size_t i = 0; i < r.rates.size(); ++i) {
    json cs = json::array();
    for (const auto& m : r.per_rate[i]) cs.push_back(margins_json(m));
    per.push_back(json{{"rate", json_number(r.rates[i])}, {"couplings", std::move(cs)}});
  }
  return json{{"min_lambda_minus_psi", json_number(r.min_lambda_minus_psi)},
              {"min_phi_minus_theta", json_number(r.min_phi_minus_theta)},
              {"checks", checks_json(r.checks)},
              {"passed", r.passed()},
              {"per_rate", std::move(per)}};
}

json to_json(const ErrorProfile& p) {
  json o{{"average", json_number(p.average)}, {"max", json_number(p.max)}};
  json pm = json::array();
  for (double v : p.per_message) pm.push_back(json_number(v));
  o["per_message"] = std::move(pm);
  if (!p.log_z_mean.empty()) {
    json zm = json::array(), zs = json::array();
    for (double v : p.log_z_mean) zm.push_back(json_number(v));
    for (double v : p.log_z_sd) zs.push_back(json_number(v));
    o["log_z_mean"] = std::move(zm);
    o["log_z_sd"] = std::move(zs);
  }
  return o;
}

json to_json(const TrialSummary& t) {
  json o{{"decoder", t.decoder},
         {"n", t.n},
         {"M", t.M},
         {"rate", json_number(t.rate)},
         {"seed", t.seed},
         {"samples", t.samples},
         {"zero_error_samples", t.zero_error_samples},
         {"all_zero", t.all_zero},
         {"mean_pe", json_number(t.mean_pe)},
         {"mean_log_pe", json_number(t.mean_log_pe)},
         {"stderr_log_pe", json_number(t.stderr_log_pe)},
         {"empirical_exponent", json_number(t.empirical_exponent)},
         {"composition", to_json(t.composition)}};
  if (t.all_zero) o["reason"] = "every sampled codebook has zero error probability";
  return o;
}

void write_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot move results into '" + path + "'");
  }
}

}  // namespace explab::io
