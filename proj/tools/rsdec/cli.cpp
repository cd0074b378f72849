#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "rsdec/contraction.hpp"
#include "rsdec/parallel.hpp"

namespace rsdec::cli {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir;
  std::optional<double> rate_scale;
};

// Shortest round-trip decimal, independent of the locale.
void put_number(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, res.ptr);
}

ordered_json json_number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

class CsvFile {
 public:
  explicit CsvFile(const fs::path& path) : f_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!f_) throw std::runtime_error("cannot write " + path.string());
  }
  void row(const std::string& line) { f_ << line << '\n'; }
  ~CsvFile() = default;
  void close() {
    f_.close();
    if (!f_) throw std::runtime_error("write failed for " + path_.string());
  }

 private:
  std::ofstream f_;
  fs::path path_;
};

std::string state_header(const char* prefix, std::size_t dim) {
  std::string s;
  for (std::size_t i = 0; i < dim; ++i) {
    s += ',';
    s += prefix;
    s += std::to_string(i + 1);
  }
  return s;
}

// "1.25e-03" style, or exp(log) once the value underflows.
std::string show(double value, double log_value) {
  std::ostringstream s;
  s << std::setprecision(10);
  if (value > 0.0 && std::isfinite(value)) {
    s << value;
  } else {
    s << "exp(" << log_value << ")";
  }
  return s.str();
}

const CertificateInputs& require_inputs(const RunConfig& cfg) {
  if (!cfg.model.certificate_inputs) {
    if (cfg.model.certificate_error) throw *cfg.model.certificate_error;
    throw Error(ErrorKind::MissingLyapunov,
                "no growth/Lyapunov data for this system; add C and lambda to [certificate]");
  }
  return *cfg.model.certificate_inputs;
}

ContractionCertificate certificate_for(const RunConfig& cfg) {
  const CertificateInputs& in = require_inputs(cfg);
  const RsdeSystem& sys = *cfg.model.system;
  return build_certificate(in.growth, in.lyap, sys.diffusion(), sys.domain().diameter(),
                           cfg.model.certificate_options);
}

const Vec& require_state(const std::optional<Vec>& v, const char* name) {
  if (!v) throw Error(ErrorKind::ConfigError, std::string("sim.") + name + " is required for this command");
  return *v;
}

fs::path prepare_out(const RunConfig& cfg, const Flags& flags) {
  fs::path dir = flags.out_dir.empty() ? fs::path(cfg.output.dir) : fs::path(flags.out_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_certify(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const ContractionCertificate cert = certificate_for(cfg);
  const fs::path dir = prepare_out(cfg, flags);
  write_file(dir / "certificate.json", certificate_report_json(cert));

  const double ln2 = std::numbers::ln2;
  const double log_ln2 = std::log(ln2);
  out << std::setprecision(10);
  out << "contraction certificate\n";
  out << "  sigma_min   " << cert.sigma_min << "\n";
  out << "  C           " << cert.C << "\n";
  out << "  lambda      " << cert.lambda << "\n";
  out << "  alpha       " << cert.alpha << "\n";
  out << "  R1          " << cert.R1 << "\n";
  out << "  M           " << cert.M << "\n";
  out << "  R2          " << cert.R2 << "\n";
  out << "  xi          " << show(cert.xi, cert.log_xi) << "\n";
  out << "  beta        " << show(cert.beta, cert.log_beta) << "\n";
  out << "  gamma       " << show(cert.gamma, cert.log_gamma) << "\n";
  out << "  rate a      " << show(cert.rate_a, cert.log_rate_a) << "\n";
  const double tv = ln2 / cert.rate_a;
  out << "  TV half-life        " << show(std::isfinite(tv) ? tv : 0.0, log_ln2 - cert.log_rate_a) << "\n";
  out << "  W^2 half-life (q=2) " << show(std::isfinite(tv) ? 2.0 * tv : 0.0, std::log(2.0) + log_ln2 - cert.log_rate_a)
      << "\n";
  out << "  flags      ";
  if (cert.flags.empty()) out << " none";
  for (const auto& f : cert.flags) out << ' ' << f;
  out << "\n  wrote " << (dir / "certificate.json").string() << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const RsdeSystem& sys = *cfg.model.system;
  const Vec& x0 = require_state(cfg.sim.x0, "x0");
  const SimConfig& sc = cfg.sim.config;
  EulerRun run(sys, x0, sc);
  const fs::path dir = prepare_out(cfg, flags);
  CsvFile csv(dir / "trajectory.csv");
  csv.row("t" + state_header("x", sys.dim()));

  const LyapunovSpec* lyap = cfg.model.certificate_inputs ? &cfg.model.certificate_inputs->lyap : nullptr;
  double v_min = std::numeric_limits<double>::infinity();
  double v_max = -v_min;
  std::size_t rows = 0;
  std::string line;
  auto record = [&](double t, const Vec& x) {
    line.clear();
    put_number(line, t);
    for (double v : x) {
      line += ',';
      put_number(line, v);
    }
    csv.row(line);
    ++rows;
    if (lyap) {
      const double v = lyap->value(x);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
  };
  record(0.0, x0);
  const std::size_t steps = sc.step_count();
  for (std::size_t k = 1; k <= steps; ++k) {
    run.advance();
    if (k % sc.record_stride == 0 || k == steps) record(run.time(), run.state());
  }
  csv.close();

  out << std::setprecision(10);
  out << "simulated " << steps << " steps, wrote " << rows << " rows to " << (dir / "trajectory.csv").string()
      << "\n";
  out << "final state:";
  for (double v : run.state()) out << ' ' << v;
  out << "\n";
  if (lyap) out << "Lyapunov value along recorded path: min " << v_min << ", max " << v_max << "\n";
  return 0;
}

int cmd_couple(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const RsdeSystem& sys = *cfg.model.system;
  const Vec& x0 = require_state(cfg.sim.x0, "x0");
  const Vec& y0 = require_state(cfg.sim.y0, "y0");
  const SimConfig& sc = cfg.sim.config;
  const std::size_t steps = sc.step_count();

  std::optional<ContractionCertificate> cert;
  const LyapunovSpec* lyap = nullptr;
  if (cfg.model.certificate_inputs) {
    cert = certificate_for(cfg);
    lyap = &cfg.model.certificate_inputs->lyap;
  }
  const InnerProduct ip = lyap ? lyap->norm() : InnerProduct::euclidean(sys.dim());
  const fs::path dir = prepare_out(cfg, flags);

  // Replica 0 is written out in full.
  {
    CoupledRun run(sys, x0, y0, sc, ip, 0);
    CsvFile csv(dir / "coupled.csv");
    csv.row("t" + state_header("x", sys.dim()) + state_header("y", sys.dim()) + (cert ? ",rho" : ""));
    std::string line;
    auto record = [&] {
      line.clear();
      put_number(line, run.time());
      for (double v : run.x()) {
        line += ',';
        put_number(line, v);
      }
      for (double v : run.y()) {
        line += ',';
        put_number(line, v);
      }
      if (cert) {
        line += ',';
        put_number(line, eval_rho(*cert, *lyap, run.x(), run.y()));
      }
      csv.row(line);
    };
    record();
    for (std::size_t k = 1; k <= steps; ++k) {
      run.advance();
      if (k % sc.record_stride == 0 || k == steps) record();
    }
    csv.close();
    ordered_json side;
    side["coupling_time"] = run.coupling_time() ? json_number(*run.coupling_time()) : ordered_json(nullptr);
    write_file(dir / "coupled.json", side.dump(2) + "\n");
  }

  const std::size_t n = cfg.sim.replicas;
  std::vector<std::optional<double>> tau(n);
  parallel_for(n, flags.threads, [&](std::size_t i) {
    CoupledRun run(sys, x0, y0, sc, ip, i);
    for (std::size_t k = 1; k <= steps && !run.coupled(); ++k) run.advance();
    tau[i] = run.coupling_time();
  });

  const double horizon = static_cast<double>(steps) * sc.step;
  std::size_t coupled = 0;
  ordered_json times = ordered_json::array();
  for (const auto& t : tau) {
    coupled += t ? 1 : 0;
    times.push_back(t ? json_number(*t) : ordered_json(nullptr));
  }
  constexpr int kGrid = 100;
  ordered_json surv_t = ordered_json::array(), surv_p = ordered_json::array();
  for (int g = 0; g <= kGrid; ++g) {
    const double t = horizon * g / kGrid;
    std::size_t alive = 0;
    for (const auto& s : tau) alive += (!s || *s > t) ? 1 : 0;
    surv_t.push_back(t);
    surv_p.push_back(static_cast<double>(alive) / static_cast<double>(n));
  }
  constexpr int kBins = 20;
  std::vector<std::size_t> counts(kBins, 0);
  ordered_json edges = ordered_json::array();
  for (int b = 0; b <= kBins; ++b) edges.push_back(horizon * b / kBins);
  for (const auto& s : tau) {
    if (!s) continue;
    const int b = horizon > 0.0 ? std::min(kBins - 1, static_cast<int>(*s / horizon * kBins)) : 0;
    ++counts[b];
  }

  ordered_json j;
  j["replicas"] = n;
  j["horizon"] = horizon;
  j["step"] = sc.step;
  j["coupled"] = coupled;
  j["coupled_fraction"] = static_cast<double>(coupled) / static_cast<double>(n);
  j["coupling_times"] = times;
  j["survival"] = {{"t", surv_t}, {"p_not_coupled", surv_p}};
  j["histogram"] = {{"edges", edges}, {"counts", counts}};
  write_file(dir / "coupling.json", j.dump(2) + "\n");

  out << "coupled " << coupled << " of " << n << " replicas by t = " << horizon << "\n";
  out << "wrote " << (dir / "coupled.csv").string() << ", " << (dir / "coupled.json").string() << ", "
      << (dir / "coupling.json").string() << "\n";
  return 0;
}

int cmd_convergence(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const RsdeSystem& sys = *cfg.model.system;
  const Vec& x0 = require_state(cfg.sim.x0, "x0");
  const Vec& y0 = require_state(cfg.sim.y0, "y0");
  if (cfg.sim.probes.empty()) throw Error(ErrorKind::ConfigError, "sim.probes is required for convergence");
  if (cfg.sim.replicas < 2) throw Error(ErrorKind::ConfigError, "convergence needs sim.replicas >= 2");
  const ContractionCertificate cert = certificate_for(cfg);
  const LyapunovSpec& lyap = require_inputs(cfg).lyap;

  ConvergenceOptions opts;
  opts.rate_scale = flags.rate_scale.value_or(cfg.sim.rate_scale);
  opts.estimate_bias = cfg.sim.estimate_bias;
  opts.threads = flags.threads;
  const ConvergenceReport report = check_convergence(sys, cert, lyap, point_mass(x0), point_mass(y0),
                                                     cfg.sim.config, cfg.sim.replicas, cfg.sim.probes, opts);

  const fs::path dir = prepare_out(cfg, flags);
  CsvFile csv(dir / "convergence.csv");
  csv.row("t,mean_rho,stderr,bound,pass");
  ordered_json rows = ordered_json::array();
  bool all_pass = true;
  std::string line;
  for (const auto& r : report.rows) {
    line.clear();
    put_number(line, r.time);
    line += ',';
    put_number(line, r.mean);
    line += ',';
    put_number(line, r.stderr_);
    line += ',';
    put_number(line, r.bound);
    line += r.pass ? ",PASS" : ",FAIL";
    csv.row(line);
    all_pass = all_pass && r.pass;
    rows.push_back({{"t", r.time},
                    {"mean_rho", json_number(r.mean)},
                    {"stderr", json_number(r.stderr_)},
                    {"bound", json_number(r.bound)},
                    {"pass", r.pass}});
  }
  csv.close();

  ordered_json j;
  j["rate"] = json_number(report.rate);
  j["certified_rate"] = json_number(report.certified_rate);
  j["rate_scale"] = opts.rate_scale;
  j["bias_constant"] = json_number(report.bias_constant);
  j["bias_allowance"] = json_number(report.bias_allowance);
  j["replicas"] = report.replicas;
  j["step"] = cfg.sim.config.step;
  j["all_pass"] = all_pass;
  j["rows"] = rows;
  write_file(dir / "convergence.json", j.dump(2) + "\n");

  out << std::setprecision(6);
  out << "rate " << report.rate << " (certified " << report.certified_rate << " x " << opts.rate_scale
      << "), bias allowance " << report.bias_allowance << ", " << report.replicas << " replicas\n";
  out << "        t      E[rho]      stderr       bound\n";
  for (const auto& r : report.rows) {
    out << std::setw(9) << r.time << ' ' << std::setw(11) << r.mean << ' ' << std::setw(11) << r.stderr_ << ' '
        << std::setw(11) << r.bound << "  " << (r.pass ? "PASS" : "FAIL") << "\n";
  }
  out << (all_pass ? "all probes PASS" : "some probes FAIL") << "\n";
  return 0;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NoFiniteM:
    case ErrorKind::InfiniteR2:
    case ErrorKind::NotHurwitz:
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::SingularG:
    case ErrorKind::LipschitzViolation:
    case ErrorKind::MissingLyapunov:
      return 2;
    case ErrorKind::DriftNaN:
    case ErrorKind::QuadratureFailure:
      return 3;
    default:
      return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const char* env_seed) {
  CLI::App app{"Reflected SDE simulation and Wasserstein contraction certificates", "rsdec"};
  app.require_subcommand(1);
  Flags flags;
  std::string command;
  for (const char* name : {"certify", "simulate", "couple", "convergence"}) {
    static const std::map<std::string, std::string> help{
        {"certify", "compute the contraction certificate"},
        {"simulate", "run one projected Euler trajectory"},
        {"couple", "run reflection-coupled pairs and record coupling times"},
        {"convergence", "compare coupled Monte Carlo estimates with the certified decay"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", flags.config, "TOML run configuration")->required();
    sub->add_option("--seed", flags.seed, "override the configured seed");
    sub->add_option("--threads", flags.threads, "worker threads (default: hardware threads)");
    sub->add_option("--out", flags.out_dir, "output directory");
    if (std::string(name) == "convergence") {
      sub->add_option("--rate-scale", flags.rate_scale, "multiply the certified rate before checking");
    }
    sub->callback([&command, name] { command = name; });
  }

  std::vector<std::string> argv_store{"rsdec"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(flags.config);
    if (env_seed && *env_seed) {
      std::uint64_t v = 0;
      const char* end = env_seed + std::char_traits<char>::length(env_seed);
      const auto res = std::from_chars(env_seed, end, v);
      if (res.ec != std::errc() || res.ptr != end) {
        throw Error(ErrorKind::ConfigError, std::string("RSDEC_SEED is not an unsigned integer: ") + env_seed);
      }
      cfg.sim.config.seed = v;
    }
    if (flags.seed) cfg.sim.config.seed = *flags.seed;
    if (flags.threads == 0) flags.threads = default_thread_count();

    if (command == "certify") return cmd_certify(cfg, flags, out);
    if (command == "simulate") return cmd_simulate(cfg, flags, out);
    if (command == "couple") return cmd_couple(cfg, flags, out);
    return cmd_convergence(cfg, flags, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    const char* label = code == 2 ? "assumption violated" : code == 3 ? "runtime failure" : "configuration error";
    err << "rsdec: " << label << ": " << e.what() << "\n";
    return code;
  } catch (const std::exception& e) {
    err << "rsdec: runtime failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace rsdec::cli
