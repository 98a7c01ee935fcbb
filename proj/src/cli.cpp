#include "explab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "explab/duals.hpp"
#include "explab/exponents.hpp"
#include "explab/io.hpp"
#include "explab/search.hpp"
#include "explab/simulator.hpp"

namespace explab::cli {

using nlohmann::json;

namespace {

constexpr const char* kCsvColumns = R"(CSV columns (one record per rate point, values in nats):
  exponent:          rate,value,raw_value,feasible,boundary_distance,threshold,error
  certify theorem1:  rate,ml_upper,mmi_lower,mmi_minus_ml,trc_ml,trc_mmi,lambda_minus_psi,phi_minus_theta,passed
  certify lemma3:    rate,coupling,psi,theta,lambda,phi,lambda_minus_psi,phi_minus_theta
  simulate:          decoder,n,M,rate,samples,zero_error_samples,mean_log_pe,stderr_log_pe,empirical_exponent,mean_pe)";

struct Common {
  std::string channel_path;
  double bsc = -1.0;
  std::string composition;
  unsigned threads = 0;
  std::string json_path;
  std::string csv_path;
  bool bits = false;
};

struct ExponentArgs {
  std::string kind;
  std::string rates;
  std::string metric = "ml";
  std::size_t grid_k = 0, outer_k = 0;
  int refine = -1;
  std::string plot_script;
};

struct CertifyArgs {
  std::string what;
  std::string rates;
  double rate = -1.0;
  std::size_t coupling_k = 4;
  bool strict = false;
  bool no_primal = false;
};

struct SimulateArgs {
  std::size_t n = 0, M = 0, samples = 100;
  std::uint64_t seed = 1;
  std::vector<std::string> decoders;
  std::uint64_t cap = kDefaultEnumerationCap;
};

struct Output {
  json config;
  json results = json::array();
  json flags = json::array();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--channel", c.channel_path, "Channel file ('dmc <|X|> <|Y|>' then rows)");
  sub->add_option("--bsc", c.bsc, "Use BSC(p) instead of a channel file")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--composition", c.composition, "Input composition, e.g. 0.5,0.5 (default uniform)");
  sub->add_option("--threads", c.threads, "Worker threads (default: EXPLAB_THREADS, else 1)");
  sub->add_option("--json", c.json_path, "Write results as JSON");
  sub->add_option("--csv", c.csv_path, "Write results as CSV");
  sub->add_flag("--bits", c.bits, "Show rates and exponents in bits in the summary table");
}

Channel resolve_channel(const Common& c) {
  if (!c.channel_path.empty() && c.bsc >= 0.0) throw Error("give either --channel or --bsc, not both");
  if (!c.channel_path.empty()) return io::load_channel(c.channel_path);
  if (c.bsc >= 0.0) return Channel::bsc(c.bsc);
  throw Error("a channel is required (--channel FILE or --bsc P)");
}

unsigned resolve_threads(const Common& c) { return c.threads > 0 ? c.threads : search::default_threads(); }

// Uniform or user composition, moved onto the 1/k lattice with a notice when needed.
Dist resolve_composition(const Common& c, std::size_t nx, std::size_t k, const char* lattice,
                         std::ostream& err) {
  const bool given = !c.composition.empty();
  const Dist q = given ? io::parse_dist(c.composition) : Dist::uniform(nx);
  if (q.size() != nx)
    throw Error("composition has " + std::to_string(q.size()) + " entries but the channel has " +
                std::to_string(nx) + " inputs");
  Dist aligned = is_grid_aligned(q, k) ? q : align_to_grid(q, k);
  if (!given || !(aligned == q)) {
    err << "notice: composition " << (given ? "rounded" : "uniform") << " on the 1/" << k << " "
        << lattice << ":";
    for (double v : aligned.probs()) err << " " << io::format_number(v);
    err << "\n";
  }
  return aligned;
}

json channel_config(const Channel& ch) { return io::to_json(ch); }

double display(double v, bool bits) { return bits ? v / std::log(2.0) : v; }

std::string cell(double v, bool bits) {
  char buf[32];
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  std::snprintf(buf, sizeof buf, "%.6f", display(v, bits));
  return buf;
}

void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << (i ? "  " : "");
      out << std::string(width[i] - r[i].size(), ' ') << r[i];
    }
    out << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

std::string csv_text(const Output& o) {
  std::string s;
  for (std::size_t i = 0; i < o.csv_header.size(); ++i) s += (i ? "," : "") + o.csv_header[i];
  s += "\n";
  for (const auto& r : o.csv_rows) {
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
    s += "\n";
  }
  return s;
}

void emit(const Common& c, const Output& o) {
  if (!c.json_path.empty()) {
    json doc{{"version", io::kFormatVersion},
             {"config", o.config},
             {"results", o.results},
             {"flags", o.flags}};
    io::write_atomic(c.json_path, doc.dump(2) + "\n");
  }
  if (!c.csv_path.empty()) io::write_atomic(c.csv_path, csv_text(o));
}

std::string plot_script(const std::string& csv, const std::string& title) {
  std::ostringstream os;
  os << "# gnuplot script; run with: gnuplot -p <this file>\n"
     << "set datafile separator ','\n"
     << "set key top right\n"
     << "set xlabel 'R [nats]'\n"
     << "set ylabel 'exponent [nats]'\n"
     << "set grid\n"
     << "plot '" << csv << "' using 1:2 skip 1 with linespoints title '" << title << "'\n";
  return os.str();
}

OptimizerOptions optimizer_options(const Channel& ch, const ExponentArgs* e, unsigned threads) {
  OptimizerOptions o = OptimizerOptions::for_inputs(ch.inputs());
  if (e) {
    if (e->grid_k) o.grid_k = e->grid_k;
    if (e->outer_k) o.outer_k = e->outer_k;
    if (e->refine >= 0) o.refine_iters = e->refine;
  }
  o.threads = threads;
  o.validate();
  return o;
}

int run_exponent(const Common& c, const ExponentArgs& a, std::ostream& out, std::ostream& err) {
  const Channel ch = resolve_channel(c);
  const unsigned threads = resolve_threads(c);
  const OptimizerOptions opts = optimizer_options(ch, &a, threads);
  const Dist q = resolve_composition(c, ch.inputs(), opts.outer_k, "optimizer grid", err);
  const ExponentKind kind = parse_exponent_kind(a.kind);
  const DecodingMetric metric = parse_metric(a.metric);
  const auto rates = io::parse_rates(a.rates);
  if (!a.plot_script.empty() && c.csv_path.empty()) throw Error("--plot-script needs --csv");

  const ExponentCurve curve = sweep(rates, q, metric, ch, opts, kind);

  Output o;
  o.config = json{{"command", "exponent"},
                  {"kind", std::string(exponent_kind_name(kind))},
                  {"metric", std::string(metric.name())},
                  {"channel", channel_config(ch)},
                  {"composition", io::to_json(q)},
                  {"rates", json::array()},
                  {"optimizer", io::to_json(opts)}};
  for (double r : rates) o.config["rates"].push_back(io::json_number(r));
  o.csv_header = {"rate", "value", "raw_value", "feasible", "boundary_distance", "threshold", "error"};
  std::vector<std::vector<std::string>> table;
  for (const auto& rec : curve.records) {
    json j{{"rate", io::json_number(rec.rate)}, {"ok", rec.ok}};
    if (rec.ok && rec.result) {
      const auto& r = *rec.result;
      j["result"] = io::to_json(r);
      o.csv_rows.push_back({io::format_number(rec.rate), io::format_number(r.value),
                            io::format_number(r.raw_value), r.diagnostics.feasible ? "1" : "0",
                            io::format_number(r.diagnostics.boundary_distance),
                            io::format_number(r.diagnostics.threshold), ""});
      table.push_back({cell(rec.rate, c.bits), cell(r.value, c.bits), r.diagnostics.feasible ? "yes" : "no"});
      if (!r.diagnostics.feasible)
        o.flags.push_back(json{{"rate", io::json_number(rec.rate)}, {"flag", "infeasible"}});
    } else {
      j["error"] = rec.error;
      o.csv_rows.push_back({io::format_number(rec.rate), "", "", "", "", "", rec.error});
      table.push_back({cell(rec.rate, c.bits), "error", rec.error});
      o.flags.push_back(json{{"rate", io::json_number(rec.rate)}, {"flag", "error"}, {"reason", rec.error}});
      err << "warning: rate " << io::format_number(rec.rate) << ": " << rec.error << "\n";
    }
    o.results.push_back(std::move(j));
  }
  const std::string unit = c.bits ? " [bits]" : " [nats]";
  out << exponent_kind_name(kind) << " exponent, " << metric.name() << " metric\n";
  print_table(out, {"R" + unit, "E" + unit, "feasible"}, table);
  emit(c, o);
  if (!a.plot_script.empty())
    io::write_atomic(a.plot_script,
                     plot_script(c.csv_path, std::string(exponent_kind_name(kind)) + " " +
                                                 std::string(metric.name())));
  return 0;
}

int run_certify(const Common& c, const CertifyArgs& a, std::ostream& out, std::ostream& err) {
  const Channel ch = resolve_channel(c);
  const unsigned threads = resolve_threads(c);
  const OptimizerOptions opts = optimizer_options(ch, nullptr, threads);
  CertifyOptions copts;
  copts.coupling_k = a.coupling_k;
  copts.primal = !a.no_primal;
  Output o;
  o.config = json{{"command", "certify"},
                  {"what", a.what},
                  {"channel", channel_config(ch)},
                  {"optimizer", io::to_json(opts)},
                  {"coupling_k", a.coupling_k},
                  {"primal", copts.primal},
                  {"strict", a.strict},
                  {"certify_tol", io::json_number(copts.certify_tol)},
                  {"combined_tol", io::json_number(copts.combined_tol)}};
  bool failed = false;
  std::vector<std::vector<std::string>> table;

  if (a.what == "theorem1") {
    if (a.rate < 0.0 && a.rates.empty()) throw Error("certify theorem1 needs --rate or --rates");
    const auto rates = a.rate >= 0.0 ? std::vector<double>{a.rate} : io::parse_rates(a.rates);
    const Dist q = resolve_composition(c, ch.inputs(), opts.outer_k, "optimizer grid", err);
    o.config["composition"] = io::to_json(q);
    o.config["rates"] = json::array();
    for (double r : rates) o.config["rates"].push_back(io::json_number(r));
    o.csv_header = {"rate", "ml_upper", "mmi_lower", "mmi_minus_ml", "trc_ml", "trc_mmi",
                    "lambda_minus_psi", "phi_minus_theta", "passed"};
    for (double R : rates) {
      const BoundReport rep = certify_theorem1(RatePoint{R, q}, ch, opts, copts);
      o.results.push_back(io::to_json(rep));
      const auto primal = [&](double v) { return rep.has_primal ? io::format_number(v) : std::string(); };
      o.csv_rows.push_back({io::format_number(R), io::format_number(rep.ml_upper),
                            io::format_number(rep.mmi_lower), io::format_number(rep.mmi_minus_ml),
                            primal(rep.trc_ml), primal(rep.trc_mmi),
                            io::format_number(rep.lambda_minus_psi),
                            io::format_number(rep.phi_minus_theta), rep.passed() ? "1" : "0"});
      table.push_back({cell(R, c.bits), cell(rep.ml_upper, c.bits), cell(rep.mmi_lower, c.bits),
                       rep.has_primal ? cell(rep.trc_ml, c.bits) : "-",
                       rep.has_primal ? cell(rep.trc_mmi, c.bits) : "-", rep.passed() ? "pass" : "FAIL"});
      for (const auto& chk : rep.checks) {
        if (chk.passed) continue;
        failed = true;
        o.flags.push_back(json{{"rate", io::json_number(R)},
                               {"check", chk.name},
                               {"margin", io::json_number(chk.margin)},
                               {"tol", io::json_number(chk.tol)}});
        err << (a.strict ? "error" : "warning") << ": R=" << io::format_number(R) << " check "
            << chk.name << " failed (margin " << io::format_number(chk.margin) << ")\n";
      }
    }
    const std::string unit = c.bits ? " [bits]" : " [nats]";
    print_table(out, {"R" + unit, "ml_upper", "mmi_lower", "trc_ml", "trc_mmi", "status"}, table);
  } else if (a.what == "lemma3") {
    const auto rates = a.rates.empty() ? std::vector<double>{0.0, 0.1, 0.2, 0.4} : io::parse_rates(a.rates);
    const Dist q = resolve_composition(c, ch.inputs(), a.coupling_k, "coupling grid", err);
    o.config["composition"] = io::to_json(q);
    o.config["rates"] = json::array();
    for (double r : rates) o.config["rates"].push_back(io::json_number(r));
    const Lemma3Report rep = certify_lemma3(q, rates, ch, opts, copts);
    o.results.push_back(io::to_json(rep));
    o.csv_header = {"rate", "coupling", "psi", "theta", "lambda", "phi", "lambda_minus_psi", "phi_minus_theta"};
    for (std::size_t i = 0; i < rep.rates.size(); ++i) {
      double worst_lp = INFINITY, worst_pt = INFINITY;
      for (const auto& m : rep.per_rate[i]) {
        std::string cpl;
        for (double v : m.coupling.probs()) cpl += (cpl.empty() ? "" : ";") + io::format_number(v);
        o.csv_rows.push_back({io::format_number(rep.rates[i]), cpl, io::format_number(m.psi),
                              io::format_number(m.theta), io::format_number(m.lambda),
                              io::format_number(m.phi), io::format_number(m.lambda_minus_psi),
                              io::format_number(m.phi_minus_theta)});
        worst_lp = std::min(worst_lp, m.lambda_minus_psi);
        worst_pt = std::min(worst_pt, m.phi_minus_theta);
      }
      table.push_back({cell(rep.rates[i], c.bits), cell(worst_lp, c.bits), cell(worst_pt, c.bits)});
    }
    for (const auto& chk : rep.checks) {
      if (chk.passed) continue;
      failed = true;
      o.flags.push_back(json{{"check", chk.name},
                             {"margin", io::json_number(chk.margin)},
                             {"tol", io::json_number(chk.tol)}});
      err << (a.strict ? "error" : "warning") << ": check " << chk.name << " failed (margin "
          << io::format_number(chk.margin) << ")\n";
    }
    print_table(out, {"R", "min lambda-psi", "min phi-theta"}, table);
  } else {
    throw Error("unknown certification '" + a.what + "' (expected theorem1 or lemma3)");
  }
  emit(c, o);
  return failed && a.strict ? 1 : 0;
}

int run_simulate(const Common& c, const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const Channel ch = resolve_channel(c);
  const unsigned threads = resolve_threads(c);
  if (a.n == 0 || a.M == 0) throw Error("--n and --M must be positive");
  const Dist q = resolve_composition(c, ch.inputs(), a.n, "type lattice", err);
  std::vector<DecoderSpec> decoders;
  for (const auto& d : a.decoders.empty() ? std::vector<std::string>{"ml", "mmi"} : a.decoders)
    decoders.push_back(parse_decoder(d));

  Output o;
  o.config = json{{"command", "simulate"},
                  {"channel", channel_config(ch)},
                  {"composition", io::to_json(q)},
                  {"n", a.n},
                  {"M", a.M},
                  {"samples", a.samples},
                  {"seed", a.seed},
                  {"enumeration_cap", a.cap},
                  {"decoders", json::array()}};
  for (const auto& d : decoders) o.config["decoders"].push_back(d.tag());
  o.csv_header = {"decoder", "n", "M", "rate", "samples", "zero_error_samples", "mean_log_pe",
                  "stderr_log_pe", "empirical_exponent", "mean_pe"};
  std::vector<std::vector<std::string>> table;
  for (const auto& d : decoders) {
    const TrialSummary t = empirical_trc(a.n, a.M, q, ch, d, a.samples, a.seed, threads, a.cap);
    o.results.push_back(io::to_json(t));
    o.csv_rows.push_back({t.decoder, std::to_string(t.n), std::to_string(t.M), io::format_number(t.rate),
                          std::to_string(t.samples), std::to_string(t.zero_error_samples),
                          io::format_number(t.mean_log_pe), io::format_number(t.stderr_log_pe),
                          io::format_number(t.empirical_exponent), io::format_number(t.mean_pe)});
    table.push_back({t.decoder, cell(t.rate, c.bits), cell(t.empirical_exponent, c.bits),
                     cell(t.stderr_log_pe / static_cast<double>(t.n), c.bits),
                     std::to_string(t.zero_error_samples)});
    if (t.zero_error_samples > 0)
      o.flags.push_back(json{{"decoder", t.decoder},
                             {"flag", t.all_zero ? "all_zero_error" : "zero_error_samples"},
                             {"count", t.zero_error_samples}});
    if (t.all_zero) err << "warning: " << t.decoder << ": every sampled codebook has zero error\n";
  }
  const std::string unit = c.bits ? " [bits]" : " [nats]";
  out << "n=" << a.n << " M=" << a.M << " samples=" << a.samples << " seed=" << a.seed << "\n";
  print_table(out, {"decoder", "R" + unit, "exponent" + unit, "stderr", "zero-error"}, table);
  emit(c, o);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Error exponents of typical random codes over discrete memoryless channels"};
  app.footer(kCsvColumns);
  app.require_subcommand(1);

  Common common;
  ExponentArgs ex;
  CertifyArgs ce;
  SimulateArgs si;

  auto* exponent = app.add_subcommand("exponent", "Exponent curve over a list of rates");
  exponent->add_option("kind", ex.kind, "trc, ex or random")->required();
  exponent->add_option("--rates", ex.rates, "start:stop:step or r1,r2,... in nats")->required();
  exponent->add_option("--metric", ex.metric, "ml or mmi");
  exponent->add_option("--grid-k", ex.grid_k, "Inner lattice resolution");
  exponent->add_option("--outer-k", ex.outer_k, "Coupling lattice resolution");
  exponent->add_option("--refine", ex.refine, "Refinement iterations");
  exponent->add_option("--plot-script", ex.plot_script, "Write a gnuplot script for the CSV");
  add_common(exponent, common);

  auto* certify = app.add_subcommand("certify", "Check the dual sandwich numerically");
  certify->add_option("what", ce.what, "theorem1 or lemma3")->required();
  certify->add_option("--rate", ce.rate, "Single rate in nats");
  certify->add_option("--rates", ce.rates, "start:stop:step or r1,r2,...");
  certify->add_option("--coupling-k", ce.coupling_k, "Coupling lattice of the per-coupling table");
  certify->add_flag("--strict", ce.strict, "Exit 1 when a check fails");
  certify->add_flag("--no-primal", ce.no_primal, "Skip the primal exponents in theorem1");
  add_common(certify, common);

  auto* simulate = app.add_subcommand("simulate", "Exact simulation of fixed-composition codes");
  simulate->add_option("--n", si.n, "Blocklength")->required();
  simulate->add_option("--M", si.M, "Number of messages")->required();
  simulate->add_option("--samples", si.samples, "Sampled codebooks");
  simulate->add_option("--seed", si.seed, "RNG seed");
  simulate->add_option("--decoder", si.decoders, "ml, mmi, mce or gld[:metric[:beta]] (repeatable)");
  simulate->add_option("--cap", si.cap, "Enumeration cap on |Y|^n");
  add_common(simulate, common);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("explab");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (exponent->parsed()) return run_exponent(common, ex, out, err);
    if (certify->parsed()) return run_certify(common, ce, out, err);
    return run_simulate(common, si, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace explab::cli
