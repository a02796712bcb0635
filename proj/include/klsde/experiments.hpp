#pragma once

// Experiment problems and the convergence / trajectory / gallery runs behind
// the benchmark tool. Every run is a pure function of its configuration.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "klsde/baselines.hpp"
#include "klsde/errors.hpp"
#include "klsde/klprocess.hpp"
#include "klsde/matkit.hpp"
#include "klsde/moments.hpp"
#include "klsde/parallel.hpp"
#include "klsde/sampler.hpp"

namespace klsde {

// ---------------------------------------------------------------- problems

struct TurbulentParams {
  double t1 = 0.5;
  double t2 = 0.5;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double beta = 2.0;
  double t_end = 1.0;
};

/// Velocity of a particle in 3-d turbulence: 6-dimensional, symmetric L.
inline SdeProblem build_turbulent_diffusion(const TurbulentParams& p, KlKind kind = KlKind::Wiener) {
  if (!(p.t1 > 0.0 && p.t2 > 0.0)) throw ValidationError("turbulent_diffusion: T1, T2 must be > 0");
  const DenseMatrix i3 = DenseMatrix::Identity(3, 3);
  DenseMatrix l(6, 6);
  l << -(1.0 / p.t1 + p.beta) * i3, p.beta * i3, p.beta * i3, -(1.0 / p.t2 + p.beta) * i3;
  DenseMatrix b = DenseMatrix::Zero(6, 6);
  b.topLeftCorner(3, 3) = p.sigma1 * i3;
  b.bottomRightCorner(3, 3) = p.sigma2 * i3;
  return make_problem(l, b, Vector::Ones(6), p.t_end, kind);
}

struct HeatParams {
  Index n = 200;
  double epsilon = 0.1;
  double alpha = -1.0;
  double beta = 0.1;
  double t_end = 0.4;
};

/// Grid spacing of the interior grid x_i = i dx, i = 1..n, on [0, 1].
inline double heat_grid_spacing(Index n) { return 1.0 / static_cast<double>(n + 1); }

/// Finite-difference advection-diffusion with space-time white noise:
/// L = eps Delta_n + alpha Nabla_n, B = beta / sqrt(dx) I, X0 the hat function.
inline SdeProblem build_heat_spde(const HeatParams& p, KlKind kind = KlKind::Wiener) {
  if (p.n < 2) throw ValidationError("heat_spde: n must be >= 2");
  const Index n = p.n;
  const double dx = heat_grid_spacing(n);
  DenseMatrix lap = DenseMatrix::Zero(n, n);
  DenseMatrix grad = DenseMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    lap(i, i) = -2.0;
    if (i > 0) {
      lap(i, i - 1) = 1.0;
      grad(i, i - 1) = -1.0;
    }
    if (i + 1 < n) {
      lap(i, i + 1) = 1.0;
      grad(i, i + 1) = 1.0;
    }
  }
  const DenseMatrix l = (p.epsilon / (dx * dx)) * lap + (p.alpha / (2.0 * dx)) * grad;
  const DenseMatrix b = (p.beta / std::sqrt(dx)) * DenseMatrix::Identity(n, n);
  Vector x0(n);
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i + 1) * dx;
    x0(i) = x <= 0.5 ? 2.0 * x : 2.0 - 2.0 * x;
  }
  return make_problem(l, b, x0, p.t_end, kind);
}

struct ScalarOuParams {
  double l = -1.0;
  double b = 1.0;
  double x0 = 1.0;
  double t_end = 1.0;
};

inline SdeProblem build_scalar_ou(const ScalarOuParams& p, KlKind kind = KlKind::Wiener) {
  return make_problem(DenseMatrix::Constant(1, 1, p.l), DenseMatrix::Constant(1, 1, p.b),
                      Vector::Constant(1, p.x0), p.t_end, kind);
}

/// Reads a dense matrix: one row per line, entries separated by blanks or
/// commas; '#' starts a comment.
inline DenseMatrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    for (char& ch : line)
      if (ch == ',' || ch == ';') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("matrix file '" + path + "': bad number '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("matrix file '" + path + "' is empty");
  DenseMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("matrix file '" + path + "': ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

// ----------------------------------------------------------------- methods

enum class Method { KlPhiSeries, KlDiagonalized, KlNormal, KlAugmented, KlSylvester, Em, Bem };

inline constexpr std::array<std::pair<std::string_view, Method>, 7> kMethodNames{{
    {"kl_phi_series", Method::KlPhiSeries},
    {"kl_diagonalized", Method::KlDiagonalized},
    {"kl_normal", Method::KlNormal},
    {"kl_augmented", Method::KlAugmented},
    {"kl_sylvester", Method::KlSylvester},
    {"em", Method::Em},
    {"bem", Method::Bem},
}};

inline std::string_view to_string(Method m) {
  for (const auto& [name, value] : kMethodNames)
    if (value == m) return name;
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (const auto& [n, value] : kMethodNames)
    if (n == name) return value;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

inline bool is_stepping(Method m) { return m == Method::Em || m == Method::Bem; }

/// Endpoint sampler for one method: sample index -> realization of X_t
/// (KL: m terms; stepping: m steps). Sample i uses RNG stream (seed, i).
using EndpointSampler = std::function<Vector(std::uint64_t)>;

inline EndpointSampler make_endpoint_sampler(const SdeProblem& problem, Method method, Index m,
                                             std::uint64_t seed) {
  if (is_stepping(method)) {
    auto plan = std::make_shared<const SteppingPlan>(problem, m, method == Method::Em ? Scheme::EM : Scheme::BackwardEM);
    return [plan, seed](std::uint64_t i) { return scheme_path(*plan, seed, i); };
  }
  Strategy s = Strategy::PhiSeries;
  switch (method) {
    case Method::KlPhiSeries: s = Strategy::PhiSeries; break;
    case Method::KlDiagonalized:
    case Method::KlNormal: s = Strategy::Diagonalized; break;
    case Method::KlAugmented: s = Strategy::AugmentedExp; break;
    case Method::KlSylvester: s = Strategy::Sylvester; break;
    default: break;
  }
  auto plan = std::make_shared<const SamplerPlan>(prepare(problem, m, s));
  const Index p = problem.noise_dim();
  if (method == Method::KlNormal) {
    if (!plan->supports_fastpath()) throw StrategyError("kl_normal needs normal L and B = c I");
    return [plan, seed, m, p](std::uint64_t i) { return sample_normal_fastpath(*plan, draw_gaussians(seed, m, p, i)); };
  }
  return [plan, seed, m, p](std::uint64_t i) { return sample(*plan, draw_gaussians(seed, m, p, i)); };
}

// ------------------------------------------------------------------ config

enum class ProblemKind { TurbulentDiffusion, HeatSpde, ScalarOu, Custom };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::TurbulentDiffusion: return "turbulent_diffusion";
    case ProblemKind::HeatSpde: return "heat_spde";
    case ProblemKind::ScalarOu: return "scalar_ou";
    case ProblemKind::Custom: return "custom";
  }
  return "?";
}

struct MethodGrid {
  Method method = Method::KlPhiSeries;
  std::vector<Index> m_grid;
};

struct ExperimentConfig {
  ProblemKind kind = ProblemKind::ScalarOu;
  KlKind kl_kind = KlKind::Wiener;
  TurbulentParams turbulent;
  HeatParams heat;
  ScalarOuParams scalar;
  std::string l_file, b_file, x0_file;
  double custom_t_end = 1.0;
  /// True when t_end was not given and the problem default was used.
  bool t_end_defaulted = true;

  std::vector<MethodGrid> methods;
  Index samples = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  bool timing = true;
  double reference_tol = 1e-6;
  std::string out;

  Index gallery_realizations = 4;
  Index gallery_m = 200;
  Method gallery_method = Method::KlPhiSeries;

  Method trajectory_method = Method::Em;
  Index trajectory_steps = 1000;

  unsigned thread_count() const { return threads == 0 ? default_threads() : threads; }

  void validate() const {
    if (samples < 1) throw ConfigError("samples must be >= 1");
    for (const auto& mg : methods) {
      if (mg.m_grid.empty()) throw ConfigError("method '" + std::string(to_string(mg.method)) + "' has an empty m grid");
      for (Index m : mg.m_grid)
        if (m < 1) throw ConfigError("all m must be >= 1");
    }
    if (!(reference_tol > 0.0)) throw ConfigError("reference_tol must be > 0");
    if (gallery_realizations < 0 || gallery_m < 1) throw ConfigError("gallery: realizations >= 0, m >= 1");
    if (trajectory_steps < 1) throw ConfigError("trajectory: steps must be >= 1");
    if (!is_stepping(trajectory_method)) throw ConfigError("trajectory: method must be em or bem");
    switch (kind) {
      case ProblemKind::TurbulentDiffusion:
        if (!(turbulent.t1 > 0 && turbulent.t2 > 0 && turbulent.t_end > 0)) {
          throw ConfigError("turbulent_diffusion: T1, T2, t_end must be > 0");
        }
        if (turbulent.sigma1 < 0 || turbulent.sigma2 < 0 || turbulent.beta < 0) {
          throw ConfigError("turbulent_diffusion: sigma and beta must be >= 0");
        }
        break;
      case ProblemKind::HeatSpde:
        if (heat.n < 2 || !(heat.epsilon > 0) || heat.beta < 0 || !(heat.t_end > 0)) {
          throw ConfigError("heat_spde: need n >= 2, epsilon > 0, beta >= 0, t_end > 0");
        }
        break;
      case ProblemKind::ScalarOu:
        if (!(scalar.t_end > 0)) throw ConfigError("scalar_ou: t_end must be > 0");
        break;
      case ProblemKind::Custom:
        if (l_file.empty() || b_file.empty() || x0_file.empty()) {
          throw ConfigError("custom problem needs l_file, b_file and x0_file");
        }
        if (!(custom_t_end > 0)) throw ConfigError("custom: t_end must be > 0");
        break;
    }
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  return out;
}

template <typename T>
T get_value(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  const auto v = pt.get_optional<std::string>(key);
  if (!v) return fallback;
  std::istringstream is(*v);
  T out{};
  is >> out;
  std::string rest;
  if (is.fail() || (is >> rest)) throw ConfigError("bad value for '" + key + "': '" + *v + "'");
  return out;
}

template <>
inline bool get_value<bool>(const boost::property_tree::ptree& pt, const std::string& key, bool fallback) {
  const auto v = pt.get_optional<std::string>(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + *v + "'");
}

}  // namespace detail

inline std::vector<Index> parse_m_grid(const std::string& s) {
  std::vector<Index> out;
  for (const auto& tok : detail::split_list(s)) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      throw ConfigError("bad m-grid entry '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty m grid");
  return out;
}

inline std::vector<Method> parse_method_list(const std::string& s) {
  std::vector<Method> out;
  for (const auto& tok : detail::split_list(s)) out.push_back(parse_method(tok));
  return out;
}

/// Reads an INI configuration. Sections: [problem], [run], [m_grid],
/// [gallery], [trajectory]. Relative matrix-file paths resolve against the
/// directory of the configuration file.
inline ExperimentConfig parse_config(std::istream& in, const std::string& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  using detail::get_value;
  ExperimentConfig c;
  const std::string kind = tree.get<std::string>("problem.kind", "scalar_ou");
  if (kind == "turbulent_diffusion") c.kind = ProblemKind::TurbulentDiffusion;
  else if (kind == "heat_spde") c.kind = ProblemKind::HeatSpde;
  else if (kind == "scalar_ou") c.kind = ProblemKind::ScalarOu;
  else if (kind == "custom") c.kind = ProblemKind::Custom;
  else throw ConfigError("unknown problem kind '" + kind + "'");

  const std::string kl = tree.get<std::string>("problem.kl_kind", "wiener");
  if (kl == "wiener") c.kl_kind = KlKind::Wiener;
  else if (kl == "bridge") c.kl_kind = KlKind::BrownianBridge;
  else throw ConfigError("unknown kl_kind '" + kl + "'");

  c.t_end_defaulted = !tree.get_optional<std::string>("problem.t_end").has_value();
  auto& tp = c.turbulent;
  tp.t1 = get_value(tree, "problem.T1", tp.t1);
  tp.t2 = get_value(tree, "problem.T2", tp.t2);
  tp.sigma1 = get_value(tree, "problem.sigma1", tp.sigma1);
  tp.sigma2 = get_value(tree, "problem.sigma2", tp.sigma2);
  auto& hp = c.heat;
  hp.n = get_value<Index>(tree, "problem.n", hp.n);
  hp.epsilon = get_value(tree, "problem.epsilon", hp.epsilon);
  hp.alpha = get_value(tree, "problem.alpha", hp.alpha);
  auto& sp = c.scalar;
  sp.l = get_value(tree, "problem.l", sp.l);
  sp.b = get_value(tree, "problem.b", sp.b);
  sp.x0 = get_value(tree, "problem.x0", sp.x0);
  switch (c.kind) {
    case ProblemKind::TurbulentDiffusion:
      tp.beta = get_value(tree, "problem.beta", tp.beta);
      tp.t_end = get_value(tree, "problem.t_end", tp.t_end);
      break;
    case ProblemKind::HeatSpde:
      hp.beta = get_value(tree, "problem.beta", hp.beta);
      hp.t_end = get_value(tree, "problem.t_end", hp.t_end);
      break;
    case ProblemKind::ScalarOu:
      sp.t_end = get_value(tree, "problem.t_end", sp.t_end);
      break;
    case ProblemKind::Custom: {
      c.custom_t_end = get_value(tree, "problem.t_end", c.custom_t_end);
      auto resolve = [&](const std::string& key) {
        std::string f = tree.get<std::string>(key, "");
        if (!f.empty() && f.front() != '/') f = base_dir + "/" + f;
        return f;
      };
      c.l_file = resolve("problem.l_file");
      c.b_file = resolve("problem.b_file");
      c.x0_file = resolve("problem.x0_file");
      break;
    }
  }

  c.samples = get_value<Index>(tree, "run.samples", c.samples);
  c.seed = get_value<std::uint64_t>(tree, "run.seed", c.seed);
  c.threads = get_value<unsigned>(tree, "run.threads", c.threads);
  c.timing = get_value(tree, "run.timing", c.timing);
  c.reference_tol = get_value(tree, "run.reference_tol", c.reference_tol);
  c.out = tree.get<std::string>("run.out", "");
  for (Method m : parse_method_list(tree.get<std::string>("run.methods", ""))) {
    const auto grid = tree.get_optional<std::string>("m_grid." + std::string(to_string(m)));
    if (!grid) throw ConfigError("no m_grid entry for method '" + std::string(to_string(m)) + "'");
    c.methods.push_back({m, parse_m_grid(*grid)});
  }

  c.gallery_realizations = get_value<Index>(tree, "gallery.realizations", c.gallery_realizations);
  c.gallery_m = get_value<Index>(tree, "gallery.m", c.gallery_m);
  c.gallery_method = parse_method(tree.get<std::string>("gallery.method", "kl_phi_series"));
  if (is_stepping(c.gallery_method)) throw ConfigError("gallery: method must be a KL method");
  c.trajectory_method = parse_method(tree.get<std::string>("trajectory.method", "em"));
  c.trajectory_steps = get_value<Index>(tree, "trajectory.steps", c.trajectory_steps);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  const auto slash = path.find_last_of('/');
  return parse_config(in, slash == std::string::npos ? "." : path.substr(0, slash));
}

inline SdeProblem build_problem(const ExperimentConfig& c) {
  switch (c.kind) {
    case ProblemKind::TurbulentDiffusion: return build_turbulent_diffusion(c.turbulent, c.kl_kind);
    case ProblemKind::HeatSpde: return build_heat_spde(c.heat, c.kl_kind);
    case ProblemKind::ScalarOu: return build_scalar_ou(c.scalar, c.kl_kind);
    case ProblemKind::Custom: {
      const DenseMatrix l = read_matrix_file(c.l_file);
      const DenseMatrix b = read_matrix_file(c.b_file);
      DenseMatrix x0 = read_matrix_file(c.x0_file);
      if (x0.rows() == 1) x0.transposeInPlace();
      if (x0.cols() != 1) throw ConfigError("x0 file must hold a vector");
      try {
        return make_problem(l, b, x0.col(0), c.custom_t_end, c.kl_kind);
      } catch (const DimensionError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  throw ConfigError("unknown problem kind");
}

// ------------------------------------------------------------------ output

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ConvergenceRow {
  std::string method;
  Index m = 0;
  Index samples = 0;
  double estimate = 0.0;
  double reference = 0.0;
  double weak_error = 0.0;
  double std_error = 0.0;  // NaN when samples == 1
  std::optional<double> wall_time_s;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kConvergenceHeader =
    "method,m,samples,estimate,reference,weak_error,std_error,wall_time_s,seed";

inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << kConvergenceHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.m << ',' << r.samples << ',' << format_double(r.estimate) << ','
       << format_double(r.reference) << ',' << format_double(r.weak_error) << ','
       << (std::isnan(r.std_error) ? std::string("NA") : format_double(r.std_error)) << ','
       << (r.wall_time_s ? format_double(*r.wall_time_s) : std::string("NA")) << ',' << r.seed << '\n';
  }
}

// ------------------------------------------------------------------- runs

/// Reference value of E||X_t||^2 and how it was obtained.
struct ReferenceValue {
  double value = 0.0;
  std::string route;
  bool certified = true;
};

/// Cutoff on n for running the Lyapunov cross-check before a convergence run.
inline constexpr Index kReferenceGuardMaxDim = 64;

/// Eigenvalue series for normal L with B = c I, the general phi series
/// otherwise. For small normal problems the Lyapunov oracle must agree to
/// 1e-6 relative or the run is refused.
inline ReferenceValue compute_reference(const SdeProblem& problem, double rel_tol) {
  if (is_normal(problem.l) && detail::scalar_identity_factor(problem.b)) {
    const SeriesValue s = second_moment_normal(problem, rel_tol);
    if (problem.dim() <= kReferenceGuardMaxDim) {
      const double lyap = lyapunov_second_moment(problem);
      if (std::abs(lyap - s.value) > 1e-6 * std::abs(s.value)) {
        std::ostringstream os;
        os << "reference guard: eigenvalue series " << s.value << " and Lyapunov oracle " << lyap << " disagree";
        throw NumericalError(os.str());
      }
    }
    return {s.value, "eigenvalue_series", s.certified};
  }
  const SeriesValue s = exact_second_moment(problem, rel_tol);
  return {s.value, "phi_series", s.certified};
}

inline std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& config, const SdeProblem& problem,
                                                   const ReferenceValue& reference) {
  std::vector<ConvergenceRow> rows;
  for (const auto& mg : config.methods) {
    for (Index m : mg.m_grid) {
      const auto t0 = std::chrono::steady_clock::now();
      const EndpointSampler f = make_endpoint_sampler(problem, mg.method, m, config.seed);
      const ScalarEstimate est = monte_carlo_scalar(
          config.samples, [&](std::uint64_t i) { return f(i).squaredNorm(); }, config.thread_count());
      const auto t1 = std::chrono::steady_clock::now();
      ConvergenceRow r;
      r.method = std::string(to_string(mg.method));
      r.m = m;
      r.samples = config.samples;
      r.estimate = est.mean;
      r.reference = reference.value;
      r.weak_error = std::abs(est.mean - reference.value);
      r.std_error = est.std_error;
      if (config.timing) r.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
      r.seed = config.seed;
      rows.push_back(r);
    }
  }
  return rows;
}

inline std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& config) {
  config.validate();
  const SdeProblem problem = build_problem(config);
  return run_convergence(config, problem, compute_reference(problem, config.reference_tol));
}

/// One seeded stepping path, `t,component_1..n`, one row per step.
inline void run_trajectory(const ExperimentConfig& config, std::ostream& os) {
  config.validate();
  const SdeProblem problem = build_problem(config);
  const Scheme scheme = config.trajectory_method == Method::Em ? Scheme::EM : Scheme::BackwardEM;
  const SteppingPlan plan(problem, config.trajectory_steps, scheme);
  os << 't';
  for (Index j = 0; j < problem.dim(); ++j) os << ",component_" << (j + 1);
  os << '\n';
  step_path(plan, config.seed, 0, [&](Index i, const Vector& v) {
    const double t = i == plan.steps() ? problem.t_end : static_cast<double>(i) * plan.dt();
    os << format_double(t);
    for (Index j = 0; j < v.size(); ++j) os << ',' << format_double(v(j));
    os << '\n';
  });
}

/// Exact mean and k KL realizations at t_end: `x,mean,realization_1..k`,
/// one row per state component (x is the grid point for heat_spde, the
/// component index otherwise).
inline void run_endpoint_gallery(const ExperimentConfig& config, std::ostream& os) {
  config.validate();
  const SdeProblem problem = build_problem(config);
  const Index n = problem.dim();
  const Index k = config.gallery_realizations;
  DenseMatrix cols(n, k + 1);
  cols.col(0) = exact_mean(problem);
  if (k > 0) {
    const EndpointSampler f = make_endpoint_sampler(problem, config.gallery_method, config.gallery_m, config.seed);
    for (Index j = 0; j < k; ++j) cols.col(j + 1) = f(static_cast<std::uint64_t>(j));
  }
  os << "x,mean";
  for (Index j = 1; j <= k; ++j) os << ",realization_" << j;
  os << '\n';
  const bool grid = config.kind == ProblemKind::HeatSpde;
  for (Index i = 0; i < n; ++i) {
    os << (grid ? format_double(static_cast<double>(i + 1) * heat_grid_spacing(n)) : std::to_string(i + 1));
    for (Index j = 0; j <= k; ++j) os << ',' << format_double(cols(i, j));
    os << '\n';
  }
}

/// N endpoint realizations of one method: `sample,component_1..n`.
inline void run_samples(const ExperimentConfig& config, Method method, Index m, std::ostream& os) {
  config.validate();
  const SdeProblem problem = build_problem(config);
  const EndpointSampler f = make_endpoint_sampler(problem, method, m, config.seed);
  os << "sample";
  for (Index j = 0; j < problem.dim(); ++j) os << ",component_" << (j + 1);
  os << '\n';
  for (Index i = 0; i < config.samples; ++i) {
    const Vector x = f(static_cast<std::uint64_t>(i));
    os << i;
    for (Index j = 0; j < x.size(); ++j) os << ',' << format_double(x(j));
    os << '\n';
  }
}

/// Moment table for each m: exact and truncated second moments, the exact
/// truncation error and the a-priori bound where it applies.
inline void run_moments(const ExperimentConfig& config, const std::vector<Index>& m_grid, std::ostream& os) {
  config.validate();
  const SdeProblem problem = build_problem(config);
  os << "m,second_moment_exact,second_moment_truncated,weak_error_exact,error_bound,terms_used,tail_bound,"
        "tail_kind,certified\n";
  for (Index m : m_grid) {
    const MomentReport r = moment_report(problem, m, config.reference_tol);
    os << m << ',' << format_double(r.second_moment_exact) << ',' << format_double(r.second_moment_truncated) << ','
       << format_double(r.weak_error_exact) << ','
       << (r.weak_error_bound ? format_double(*r.weak_error_bound) : std::string("NA")) << ',' << r.terms_used
       << ',' << format_double(r.tail_bound) << ',' << to_string(r.tail_kind) << ','
       << (r.certified ? "true" : "false") << '\n';
  }
}

}  // namespace klsde
