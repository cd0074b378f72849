#pragma once

// Run configuration for the rsdec tool, read from a TOML file:
//
//   [system]       type = "zero" | "linear" | "mrac", dynamics and domain
//   [certificate]  optional explicit growth / Lyapunov data and overrides
//   [sim]          step, horizon, seed, replicas, initial states, probes
//   [output]       dir, stride
//
// Unknown keys anywhere are a ConfigError.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rsdec/contraction.hpp"
#include "rsdec/error.hpp"
#include "rsdec/mrac.hpp"
#include "rsdec/rsde.hpp"

namespace rsdec::cli {

struct Model {
  std::string kind;
  std::unique_ptr<RsdeSystem> system;
  std::optional<MracSpec> mrac;
  std::optional<MracDerived> derived;
  // Growth and Lyapunov data, when the system provides them or the
  // [certificate] table states them.
  std::optional<CertificateInputs> certificate_inputs;
  // Why certificate_inputs is empty when the system itself is still usable
  // for simulation, e.g. a linear drift that is not Hurwitz.
  std::optional<Error> certificate_error;
  CertificateOptions certificate_options;
};

struct SimSettings {
  SimConfig config;
  std::size_t replicas = 1;
  std::optional<Vec> x0;
  std::optional<Vec> y0;
  std::vector<double> probes;
  double rate_scale = 1.0;
  bool estimate_bias = true;
};

struct OutputSettings {
  std::string dir = "rsdec_out";
  std::size_t stride = 1;
};

struct RunConfig {
  Model model;
  SimSettings sim;
  OutputSettings output;
};

// Throws Error(ConfigError) for syntax, type and unknown-key problems, and
// the library's own errors (NotHurwitz, LipschitzViolation, ...) while
// assembling the model.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");

}  // namespace rsdec::cli
