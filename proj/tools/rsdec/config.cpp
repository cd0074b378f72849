#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "rsdec/error.hpp"
#include "toml.hpp"

namespace rsdec::cli {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::ConfigError, where + ": " + what);
}

void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (auto&& [key, node] : t) {
    if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
      fail(where, "unknown key '" + std::string(key.str()) + "'");
    }
  }
}

const toml::table* sub_table(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) fail(where, "'" + std::string(key) + "' must be a table");
  return n->as_table();
}

double to_number(const toml::node& n, const std::string& where) {
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_integer()) return static_cast<double>(v->get());
  fail(where, "expected a number");
}

std::optional<double> opt_number(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  return to_number(*n, where + "." + std::string(key));
}

double number(const toml::table& t, std::string_view key, const std::string& where) {
  auto v = opt_number(t, key, where);
  if (!v) fail(where, "missing '" + std::string(key) + "'");
  return *v;
}

std::optional<std::int64_t> opt_integer(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->as_integer()) return v->get();
  fail(where + "." + std::string(key), "expected an integer");
}

std::optional<bool> opt_bool(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->as_boolean()) return v->get();
  fail(where + "." + std::string(key), "expected true or false");
}

std::optional<std::string> opt_string(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->as_string()) return v->get();
  fail(where + "." + std::string(key), "expected a string");
}

std::string string(const toml::table& t, std::string_view key, const std::string& where) {
  auto v = opt_string(t, key, where);
  if (!v) fail(where, "missing '" + std::string(key) + "'");
  return *v;
}

std::vector<double> to_numbers(const toml::node& n, const std::string& where) {
  const toml::array* a = n.as_array();
  if (!a) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < a->size(); ++i) out.push_back(to_number(*a->get(i), where));
  return out;
}

std::optional<Vec> opt_vec(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  return Vec(to_numbers(*n, where + "." + std::string(key)));
}

Vec vec(const toml::table& t, std::string_view key, const std::string& where) {
  auto v = opt_vec(t, key, where);
  if (!v) fail(where, "missing '" + std::string(key) + "'");
  return *v;
}

std::optional<Mat> opt_mat(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  const std::string at = where + "." + std::string(key);
  const toml::array* rows = n->as_array();
  if (!rows || rows->empty()) fail(at, "expected a non-empty array of rows");
  std::vector<std::vector<double>> data;
  for (std::size_t i = 0; i < rows->size(); ++i) {
    data.push_back(to_numbers(*rows->get(i), at));
    if (data.back().size() != data.front().size() || data.back().empty()) fail(at, "rows differ in length");
  }
  return Mat::from_rows(data);
}

Mat mat(const toml::table& t, std::string_view key, const std::string& where) {
  auto m = opt_mat(t, key, where);
  if (!m) fail(where, "missing '" + std::string(key) + "'");
  return *m;
}

ConvexSet parse_set(const toml::table& t, const std::string& where) {
  const std::string type = string(t, "type", where);
  if (type == "whole") {
    check_keys(t, {"type", "dim"}, where);
    const auto dim = opt_integer(t, "dim", where);
    if (!dim || *dim <= 0) fail(where, "whole space needs a positive 'dim'");
    return ConvexSet::whole_space(static_cast<std::size_t>(*dim));
  }
  if (type == "box") {
    check_keys(t, {"type", "lower", "upper"}, where);
    return ConvexSet::box(vec(t, "lower", where), vec(t, "upper", where));
  }
  if (type == "ball") {
    check_keys(t, {"type", "center", "radius"}, where);
    return ConvexSet::ball(vec(t, "center", where), number(t, "radius", where));
  }
  if (type == "polygon2d") {
    check_keys(t, {"type", "vertices"}, where);
    const toml::node* n = t.get("vertices");
    if (!n || !n->is_array()) fail(where, "polygon2d needs 'vertices'");
    std::vector<std::array<double, 2>> vertices;
    for (auto&& v : *n->as_array()) {
      const auto xy = to_numbers(v, where + ".vertices");
      if (xy.size() != 2) fail(where + ".vertices", "each vertex needs two coordinates");
      vertices.push_back({xy[0], xy[1]});
    }
    return ConvexSet::polygon(std::move(vertices));
  }
  if (type == "product") {
    check_keys(t, {"type", "factors", "repeat"}, where);
    const toml::node* n = t.get("factors");
    if (!n || !n->is_array()) fail(where, "product needs 'factors'");
    const auto repeat = opt_integer(t, "repeat", where).value_or(1);
    if (repeat < 1) fail(where, "'repeat' must be at least 1");
    std::vector<ConvexSet> once;
    std::size_t i = 0;
    for (auto&& f : *n->as_array()) {
      const std::string at = where + ".factors[" + std::to_string(i++) + "]";
      if (!f.is_table()) fail(at, "each factor must be a table");
      once.push_back(parse_set(*f.as_table(), at));
    }
    std::vector<ConvexSet> factors;
    for (std::int64_t r = 0; r < repeat; ++r) factors.insert(factors.end(), once.begin(), once.end());
    return ConvexSet::product(std::move(factors));
  }
  fail(where, "unknown set type '" + type + "'");
}

FeatureMap parse_features(const toml::table& t, std::size_t state_dim, const std::string& where) {
  const std::string type = string(t, "type", where);
  if (type == "linear") {
    check_keys(t, {"type"}, where);
    return FeatureMap::linear(state_dim);
  }
  if (type == "tanh") {
    check_keys(t, {"type", "weights", "bias"}, where);
    return FeatureMap::tanh_layer(mat(t, "weights", where), vec(t, "bias", where));
  }
  if (type == "rbf") {
    check_keys(t, {"type", "centers", "width"}, where);
    const Mat c = mat(t, "centers", where);
    std::vector<Vec> centers;
    for (std::size_t i = 0; i < c.rows(); ++i) centers.emplace_back(c.row_span(i));
    return FeatureMap::rbf(std::move(centers), number(t, "width", where));
  }
  fail(where, "unknown feature map '" + type + "'");
}

MracSpec parse_mrac(const toml::table& t, const std::string& where) {
  check_keys(t, {"A", "B", "Q", "G_x", "G_theta", "theta_bar", "lipschitz", "features", "parameter_set"}, where);
  const Mat A = mat(t, "A", where);
  const Mat B = mat(t, "B", where);
  const auto* features_t = sub_table(t, "features", where);
  const auto* set_t = sub_table(t, "parameter_set", where);
  if (!features_t) fail(where, "missing [features]");
  if (!set_t) fail(where, "missing [parameter_set]");
  FeatureMap features = parse_features(*features_t, A.rows(), where + ".features");
  const std::size_t m = features.feature_dim() * B.cols();
  const double lipschitz = opt_number(t, "lipschitz", where).value_or(features.lipschitz_bound());
  return MracSpec{A,
                  B,
                  opt_mat(t, "Q", where).value_or(Mat::identity(A.rows())),
                  std::move(features),
                  lipschitz,
                  parse_set(*set_t, where + ".parameter_set"),
                  vec(t, "theta_bar", where),
                  opt_mat(t, "G_x", where).value_or(Mat::identity(A.rows())),
                  opt_mat(t, "G_theta", where).value_or(Mat::identity(m))};
}

void parse_system(const toml::table& t, Model& model) {
  const std::string where = "system";
  model.kind = string(t, "type", where);
  if (model.kind == "zero" || model.kind == "linear") {
    check_keys(t, {"type", "dim", "A", "G", "domain"}, where);
    std::optional<Mat> A;
    std::size_t dim;
    if (model.kind == "linear") {
      A = mat(t, "A", where);
      dim = A->rows();
    } else {
      const auto d = opt_integer(t, "dim", where);
      if (!d || *d <= 0) fail(where, "zero drift needs a positive 'dim'");
      dim = static_cast<std::size_t>(*d);
    }
    const Mat G = opt_mat(t, "G", where).value_or(Mat::identity(dim));
    const auto* domain_t = sub_table(t, "domain", where);
    ConvexSet domain = domain_t ? parse_set(*domain_t, where + ".domain") : ConvexSet::whole_space(dim);
    DriftFn drift;
    if (A) {
      if (!A->is_square()) fail(where + ".A", "A must be square");
      drift = [A = *A](std::span<const double> x, std::span<double> out) { multiply_into(A, x, out); };
    } else {
      drift = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    }
    model.system = std::make_unique<RsdeSystem>(std::move(drift), G, std::move(domain));
    if (A) {
      try {
        model.certificate_inputs = linear_certificate_inputs(*A, G, InnerProduct::euclidean(dim));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NotHurwitz) throw;
        model.certificate_error = e;
      }
    }
    return;
  }
  if (model.kind == "mrac") {
    check_keys(t, {"type", "mrac"}, where);
    const auto* mrac_t = sub_table(t, "mrac", where);
    if (!mrac_t) fail(where, "missing [system.mrac]");
    model.mrac.emplace(parse_mrac(*mrac_t, "system.mrac"));
    ClosedLoop loop = closed_loop_system(*model.mrac);
    model.system = std::make_unique<RsdeSystem>(std::move(loop.system));
    model.derived.emplace(std::move(loop.derived));
    model.certificate_inputs = CertificateInputs{model.derived->growth, model.derived->lyap};
    return;
  }
  fail(where, "unknown system type '" + model.kind + "'");
}

void parse_certificate(const toml::table& t, Model& model) {
  const std::string where = "certificate";
  check_keys(t, {"kappa", "alpha", "C", "lambda", "phi_power", "norm_weight", "center", "R1", "M", "R2",
                 "sigma_min", "rel_tol"},
             where);
  CertificateOptions& o = model.certificate_options;
  o.R1 = opt_number(t, "R1", where);
  o.M = opt_number(t, "M", where);
  o.R2 = opt_number(t, "R2", where);
  o.sigma_min = opt_number(t, "sigma_min", where);
  o.rel_tol = opt_number(t, "rel_tol", where).value_or(o.rel_tol);

  const auto kappa = opt_number(t, "kappa", where);
  const auto alpha = opt_number(t, "alpha", where);
  const auto C = opt_number(t, "C", where);
  const auto lambda = opt_number(t, "lambda", where);
  const auto power = opt_number(t, "phi_power", where);
  const auto weight = opt_mat(t, "norm_weight", where);
  const auto center = opt_vec(t, "center", where);
  if (!kappa && !alpha && !C && !lambda && !power && !weight && !center) return;

  const std::size_t dim = model.system->dim();
  auto& inputs = model.certificate_inputs;
  GrowthCondition growth = inputs ? inputs->growth : GrowthCondition::constant(0.0, 0.0);
  if (kappa) {
    growth = GrowthCondition::constant(*kappa, alpha.value_or(growth.alpha));
  } else if (alpha) {
    growth.alpha = *alpha;
  }
  if (!inputs && !(C && lambda)) {
    throw Error(ErrorKind::MissingLyapunov,
                "this system has no Lyapunov data; set certificate.C and certificate.lambda");
  }
  InnerProduct norm = weight ? InnerProduct(*weight) : inputs ? inputs->lyap.norm() : InnerProduct::euclidean(dim);
  Vec c = center ? *center : inputs ? inputs->lyap.center() : Vec(dim);
  const double Cv = C.value_or(inputs ? inputs->lyap.C() : 0.0);
  const double lv = lambda.value_or(inputs ? inputs->lyap.lambda() : 0.0);
  const double p = power.value_or(inputs && inputs->lyap.power_exponent() ? *inputs->lyap.power_exponent() : 2.0);
  inputs = CertificateInputs{std::move(growth), LyapunovSpec::power(p, Cv, lv, std::move(norm), std::move(c))};
}

void parse_sim(const toml::table& t, SimSettings& sim) {
  const std::string where = "sim";
  check_keys(t, {"step", "horizon", "seed", "replicas", "x0", "y0", "probes", "rate_scale", "estimate_bias",
                 "coupling_tolerance", "bridge_crossing"},
             where);
  SimConfig& c = sim.config;
  c.step = number(t, "step", where);
  c.horizon = number(t, "horizon", where);
  if (const auto seed = opt_integer(t, "seed", where)) {
    if (*seed < 0) fail(where + ".seed", "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(*seed);
  }
  if (const auto r = opt_integer(t, "replicas", where)) {
    if (*r < 1) fail(where + ".replicas", "replicas must be at least 1");
    sim.replicas = static_cast<std::size_t>(*r);
  }
  sim.x0 = opt_vec(t, "x0", where);
  sim.y0 = opt_vec(t, "y0", where);
  if (const toml::node* n = t.get("probes")) sim.probes = to_numbers(*n, where + ".probes");
  sim.rate_scale = opt_number(t, "rate_scale", where).value_or(1.0);
  sim.estimate_bias = opt_bool(t, "estimate_bias", where).value_or(true);
  c.coupling_tolerance = opt_number(t, "coupling_tolerance", where).value_or(-1.0);
  c.bridge_crossing = opt_bool(t, "bridge_crossing", where).value_or(true);
  if (!(c.step > 0.0)) fail(where + ".step", "step must be positive");
  try {
    c.validate();
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

void parse_output(const toml::table& t, OutputSettings& out) {
  const std::string where = "output";
  check_keys(t, {"dir", "stride"}, where);
  out.dir = opt_string(t, "dir", where).value_or(out.dir);
  if (const auto s = opt_integer(t, "stride", where)) {
    if (*s < 1) fail(where + ".stride", "stride must be at least 1");
    out.stride = static_cast<std::size_t>(*s);
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ")";
    fail(source_name, msg.str());
  }
  check_keys(root, {"system", "certificate", "sim", "output"}, source_name);
  const auto* system_t = sub_table(root, "system", source_name);
  const auto* sim_t = sub_table(root, "sim", source_name);
  if (!system_t) fail(source_name, "missing [system]");
  if (!sim_t) fail(source_name, "missing [sim]");

  RunConfig cfg;
  parse_sim(*sim_t, cfg.sim);
  if (const auto* out_t = sub_table(root, "output", source_name)) parse_output(*out_t, cfg.output);
  cfg.sim.config.record_stride = cfg.output.stride;
  parse_system(*system_t, cfg.model);
  if (const auto* cert_t = sub_table(root, "certificate", source_name)) parse_certificate(*cert_t, cfg.model);

  const std::size_t dim = cfg.model.system->dim();
  for (const auto* v : {&cfg.sim.x0, &cfg.sim.y0}) {
    if (*v && (*v)->dim() != dim) {
      fail("sim", "initial state has dimension " + std::to_string((*v)->dim()) + ", system has " +
                      std::to_string(dim));
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

}  // namespace rsdec::cli
