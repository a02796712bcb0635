// Benchmark harness: convergence tables, trajectories, endpoint galleries,
// raw samples and moment tables for the configured problem.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "klsde/klsde.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<klsde::Index> samples;
  std::string out;
  std::string methods;
  std::string m_grid;
  bool no_timing = false;
  unsigned threads = 0;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "INI configuration file")->required();
  sub->add_option("--seed", o.seed, "RNG seed");
  sub->add_option("--samples", o.samples, "Monte-Carlo sample count");
  sub->add_option("--out", o.out, "output CSV path (default: stdout)");
  sub->add_option("--method", o.methods, "comma-separated method names");
  sub->add_option("--m-grid", o.m_grid, "comma-separated truncation lengths / step counts");
  sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
  sub->add_flag("--no-timing", o.no_timing, "write NA for wall times (byte-reproducible output)");
}

klsde::ExperimentConfig resolve(const Overrides& o) {
  klsde::ExperimentConfig c = klsde::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.samples) c.samples = *o.samples;
  if (!o.out.empty()) c.out = o.out;
  if (o.threads != 0) c.threads = o.threads;
  if (o.no_timing) c.timing = false;
  if (!o.methods.empty()) {
    std::vector<klsde::MethodGrid> sel;
    for (klsde::Method m : klsde::parse_method_list(o.methods)) {
      klsde::MethodGrid mg{m, {}};
      for (const auto& existing : c.methods)
        if (existing.method == m) mg.m_grid = existing.m_grid;
      sel.push_back(mg);
    }
    c.methods = sel;
  }
  if (!o.m_grid.empty()) {
    const auto grid = klsde::parse_m_grid(o.m_grid);
    for (auto& mg : c.methods) mg.m_grid = grid;
  }
  c.validate();
  return c;
}

// Runs body with the configured output stream.
template <typename Body>
void with_output(const klsde::ExperimentConfig& c, Body&& body) {
  if (c.out.empty()) {
    body(std::cout);
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw klsde::ConfigError("cannot write '" + c.out + "'");
  body(f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Karhunen-Loeve sampling of linear SDEs: benchmark harness"};
  app.require_subcommand(1);
  Overrides o;
  auto* sample = app.add_subcommand("sample", "write endpoint realizations of one method");
  auto* converge = app.add_subcommand("converge", "weak-error convergence table");
  auto* trajectory = app.add_subcommand("trajectory", "one time-stepping path");
  auto* gallery = app.add_subcommand("gallery", "exact mean and KL realizations at t_end");
  auto* moments = app.add_subcommand("moments", "exact moments and truncation errors");
  for (auto* s : {sample, converge, trajectory, gallery, moments}) add_common(s, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const klsde::ExperimentConfig c = resolve(o);
    if (converge->parsed()) {
      if (c.methods.empty()) throw klsde::ConfigError("converge: no methods configured");
      const klsde::SdeProblem problem = klsde::build_problem(c);
      const klsde::ReferenceValue ref = klsde::compute_reference(problem, c.reference_tol);
      std::cerr << "# problem " << klsde::to_string(c.kind) << " n=" << problem.dim() << " t_end=" << problem.t_end
                << (c.t_end_defaulted ? " (default)" : "") << "\n# reference " << klsde::format_double(ref.value)
                << " via " << ref.route << (ref.certified ? "" : " (uncertified tail)") << '\n';
      const auto rows = klsde::run_convergence(c, problem, ref);
      with_output(c, [&](std::ostream& os) { klsde::write_convergence_csv(os, rows); });
    } else if (sample->parsed()) {
      if (c.methods.size() != 1 || c.methods[0].m_grid.size() != 1) {
        throw klsde::ConfigError("sample: select exactly one method and one m");
      }
      with_output(c, [&](std::ostream& os) { klsde::run_samples(c, c.methods[0].method, c.methods[0].m_grid[0], os); });
    } else if (trajectory->parsed()) {
      klsde::ExperimentConfig tc = c;
      if (!o.methods.empty()) {
        if (c.methods.size() != 1) throw klsde::ConfigError("trajectory: select one method");
        tc.trajectory_method = c.methods[0].method;
      }
      if (!o.m_grid.empty()) tc.trajectory_steps = klsde::parse_m_grid(o.m_grid).front();
      tc.validate();
      with_output(tc, [&](std::ostream& os) { klsde::run_trajectory(tc, os); });
    } else if (gallery->parsed()) {
      klsde::ExperimentConfig gc = c;
      if (!o.methods.empty()) {
        if (c.methods.size() != 1 || klsde::is_stepping(c.methods[0].method)) {
          throw klsde::ConfigError("gallery: select one KL method");
        }
        gc.gallery_method = c.methods[0].method;
      }
      if (!o.m_grid.empty()) gc.gallery_m = klsde::parse_m_grid(o.m_grid).front();
      if (o.samples) gc.gallery_realizations = *o.samples;
      gc.validate();
      with_output(gc, [&](std::ostream& os) { klsde::run_endpoint_gallery(gc, os); });
    } else if (moments->parsed()) {
      const std::vector<klsde::Index> grid =
          o.m_grid.empty() ? std::vector<klsde::Index>{1, 2, 4, 8, 16, 32, 64} : klsde::parse_m_grid(o.m_grid);
      with_output(c, [&](std::ostream& os) { klsde::run_moments(c, grid, os); });
    }
  } catch (const klsde::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const klsde::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const klsde::DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const klsde::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
