#include "batchrl/nmpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "batchrl/errors.hpp"
#include "batchrl/integrators.hpp"
#include "batchrl/parallel.hpp"

namespace batchrl {

void NlpSettings::validate() const {
  if (multistarts < 1) throw ConfigError("NLP solver needs at least one start");
  if (max_iterations < 1) throw ConfigError("NLP solver needs at least one iteration");
  if (!(gradient_tolerance >= 0.0)) throw ConfigError("gradient tolerance must be >= 0");
  if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("Armijo constant must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) {
    throw ConfigError("backtracking factor must lie in (0, 1)");
  }
}

std::size_t OcpProblem::horizon() const {
  if (model == nullptr) throw ConfigError("OCP without a model");
  if (start_interval > model->interval_count()) {
    throw ConfigError("OCP start interval " + std::to_string(start_interval) +
                      " beyond the batch end " + std::to_string(model->interval_count()));
  }
  return model->interval_count() - start_interval;
}

std::size_t OcpProblem::decision_count() const { return horizon() * model->control_count(); }

struct OcpObjective::Impl {
  ad::Graph graph;
};

OcpObjective::OcpObjective(const OdeModel& model, std::size_t horizon)
    : horizon_(horizon), impl_(std::make_unique<Impl>()) {
  ad::Graph& g = impl_->graph;
  const std::size_t n = model.state_count();
  const std::size_t m = model.control_count();
  const double dt = model.interval_length();
  std::vector<ad::Var> x;
  x.reserve(n);
  const std::vector<double> x0 = model.nominal_initial_state();
  for (std::size_t i = 0; i < n; ++i) x.emplace_back(&g, g.input(x0[i]));
  std::vector<ad::Var> u(m);
  for (std::size_t k = 0; k < horizon; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      const double mid = 0.5 * (model.control_lower()[j] + model.control_upper()[j]);
      u[j] = ad::Var(&g, g.parameter(mid));
    }
    x = rk4_step<ad::Var>(
        [&model](std::span<const ad::Var> s, std::span<const ad::Var> c, std::span<ad::Var> ds) {
          model.rhs(s, c, ds);
        },
        std::move(x), std::span<const ad::Var>(u), dt, model.substeps());
  }
  g.add_output(model.terminal_reward(std::span<const ad::Var>(x)).id());
}

OcpObjective::~OcpObjective() = default;
OcpObjective::OcpObjective(OcpObjective&&) noexcept = default;
OcpObjective& OcpObjective::operator=(OcpObjective&&) noexcept = default;

double OcpObjective::value(std::span<const double> state, std::span<const double> controls) {
  const double v = impl_->graph.forward(state, controls).front();
  if (!std::isfinite(v)) {
    throw IntegrationError("OCP rollout produced a non-finite objective",
                           std::vector<double>(state.begin(), state.end()));
  }
  return v;
}

double OcpObjective::value_and_gradient(std::span<const double> state,
                                        std::span<const double> controls,
                                        std::vector<double>& gradient) {
  const double v = value(state, controls);
  gradient = impl_->graph.backward(0);
  return v;
}

OcpObjective& OcpSolver::objective(std::size_t horizon) {
  auto it = objectives_.find(horizon);
  if (it == objectives_.end()) {
    it = objectives_.emplace(horizon, std::make_unique<OcpObjective>(model_, horizon)).first;
  }
  return *it->second;
}

namespace {

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

Bounds resolve_bounds(const OcpProblem& problem) {
  const std::size_t count = problem.decision_count();
  const std::size_t m = problem.model->control_count();
  Bounds b;
  if (problem.lower.empty() && problem.upper.empty()) {
    b.lower.resize(count);
    b.upper.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      b.lower[i] = problem.model->control_lower()[i % m];
      b.upper[i] = problem.model->control_upper()[i % m];
    }
  } else {
    if (problem.lower.size() != count || problem.upper.size() != count) {
      throw ConfigError("OCP bounds need " + std::to_string(count) + " entries each");
    }
    b.lower = problem.lower;
    b.upper = problem.upper;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!(b.lower[i] <= b.upper[i])) throw ConfigError("OCP bounds are inverted");
  }
  return b;
}

void project(std::span<double> x, const Bounds& b) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct StartResult {
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool failed = false;
};

StartResult ascend(OcpObjective& obj, std::span<const double> state, std::vector<double> x,
                   const Bounds& bounds, const NlpSettings& settings) {
  project(x, bounds);
  const std::size_t n = x.size();
  std::vector<double> g, gn;
  double f = obj.value_and_gradient(state, x, g);
  double step = 1.0;
  std::vector<double> xn(n), d(n);

  StartResult r;
  bool converged = false;
  std::size_t accepted_steps = 0;
  for (; r.iterations < settings.max_iterations; ++r.iterations) {
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(x[i] + g[i], bounds.lower[i], bounds.upper[i]);
      pg = std::max(pg, std::abs(p - x[i]));
    }
    if (pg <= settings.gradient_tolerance) {
      converged = true;
      break;
    }

    bool accepted = false;
    double t = step;
    double fn = f;
    for (std::size_t b = 0; b < settings.max_backtracks; ++b, t *= settings.backtrack) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * g[i];
      project(xn, bounds);
      for (std::size_t i = 0; i < n; ++i) d[i] = xn[i] - x[i];
      fn = obj.value(state, xn);
      if (fn >= f + settings.armijo * dot(g, d)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    obj.value_and_gradient(state, xn, gn);
    // Barzilai-Borwein step for the next trial; for ascent on a locally
    // concave objective s'y < 0.
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss += d[i] * d[i];
      sy += d[i] * (gn[i] - g[i]);
    }
    step = sy < 0.0 ? ss / -sy : 2.0 * t;
    step = std::clamp(step, 1e-8, 1e8);

    x.swap(xn);
    g.swap(gn);
    f = fn;
    ++accepted_steps;
  }
  r.failed = !converged && accepted_steps == 0;
  r.x = std::move(x);
  r.objective = f;
  return r;
}

}  // namespace

OcpSolution OcpSolver::solve(const OcpProblem& problem, const NlpSettings& settings, Rng& rng) {
  settings.validate();
  if (problem.model != &model_) throw ConfigError("OCP problem built for a different model");
  if (!model_.deterministic()) throw ConfigError("OCP model must be deterministic");
  if (problem.state.size() != model_.state_count()) {
    throw ConfigError("OCP state has " + std::to_string(problem.state.size()) +
                      " entries, model expects " + std::to_string(model_.state_count()));
  }
  const std::size_t horizon = problem.horizon();
  const Bounds bounds = resolve_bounds(problem);

  OcpSolution sol;
  if (horizon == 0) {
    sol.objective = model_.terminal_reward(problem.state);
    sol.start_objectives.push_back(sol.objective);
    return sol;
  }

  OcpObjective& obj = objective(horizon);
  std::vector<std::vector<double>> starts;
  if (!problem.warm_start.empty()) {
    if (problem.warm_start.size() != bounds.lower.size()) {
      throw ConfigError("warm start has the wrong length");
    }
    starts.push_back(problem.warm_start);
  }
  for (std::size_t s = 0; s < settings.multistarts; ++s) {
    std::vector<double> x(bounds.lower.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::uniform_real_distribution<double> dist(bounds.lower[i], bounds.upper[i]);
      x[i] = bounds.lower[i] == bounds.upper[i] ? bounds.lower[i] : dist(rng);
    }
    starts.push_back(std::move(x));
  }

  double best = -std::numeric_limits<double>::infinity();
  std::size_t failures = 0;
  for (auto& start : starts) {
    StartResult r = ascend(obj, problem.state, std::move(start), bounds, settings);
    sol.iterations += r.iterations;
    sol.start_objectives.push_back(r.objective);
    if (r.failed) ++failures;
    if (r.objective > best) {
      best = r.objective;
      sol.controls = std::move(r.x);
      sol.objective = r.objective;
    }
  }
  sol.degraded = failures == starts.size();
  return sol;
}

OcpSolution solve_ocp(const OcpProblem& problem, const NlpSettings& settings, Rng& rng) {
  if (problem.model == nullptr) throw ConfigError("OCP without a model");
  OcpSolver solver(*problem.model);
  return solver.solve(problem, settings, rng);
}

Trajectory nmpc_rollout(const PlantModel& plant, const OdeModel& model,
                        const NlpSettings& settings, Rng& rng) {
  if (plant.state_count() != model.state_count() ||
      plant.control_count() != model.control_count() ||
      plant.interval_count() != model.interval_count()) {
    throw ConfigError("NMPC: plant '" + plant.name() + "' and model '" + model.name() +
                      "' differ in dimensions or interval count");
  }
  const std::size_t T = plant.interval_count();
  const std::size_t m = plant.control_count();
  OcpSolver solver(model);

  Trajectory traj;
  traj.states.push_back(plant.sample_initial_state(rng));
  traj.measurements.push_back(plant.measure(traj.states.back(), rng));

  std::vector<double> tail;
  for (std::size_t t = 0; t < T; ++t) {
    OcpProblem problem;
    problem.model = &model;
    problem.start_interval = t;
    problem.state = traj.measurements.back();
    problem.warm_start = tail;
    OcpSolution sol;
    try {
      sol = solver.solve(problem, settings, rng);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string(e.what()) + " (NMPC solve at interval " +
                                 std::to_string(t) + ")",
                             e.state());
    }
    std::vector<double> action(sol.controls.begin(),
                               sol.controls.begin() + static_cast<std::ptrdiff_t>(m));
    tail.assign(sol.controls.begin() + static_cast<std::ptrdiff_t>(m), sol.controls.end());

    const std::vector<double>& previous = t == 0 ? action : traj.actions.back();
    traj.rewards.push_back(plant.reward(t, traj.states.back(), action, previous));
    StepResult next;
    try {
      next = plant.step(traj.states.back(), action, t, rng);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string(e.what()) + " (plant '" + plant.name() + "', interval " +
                                 std::to_string(t) + ")",
                             e.state());
    }
    traj.draws.push_back(action);
    traj.actions.push_back(std::move(action));
    traj.states.push_back(std::move(next.state));
    traj.measurements.push_back(std::move(next.measured));
  }
  traj.rewards.push_back(
      plant.reward(T, traj.states.back(), traj.actions.back(), traj.actions.back()));
  traj.total_return = discounted_return(traj.rewards, 1.0);
  return traj;
}

std::vector<Trajectory> nmpc_episodes(const PlantModel& plant, const OdeModel& model,
                                      const NlpSettings& settings, std::size_t episodes,
                                      std::uint64_t seed, std::size_t threads) {
  std::vector<Trajectory> out(episodes);
  parallel_for(episodes, std::max<std::size_t>(1, threads), [&](std::size_t k, std::size_t) {
    Rng rng = make_rng(seed, {k});
    out[k] = nmpc_rollout(plant, model, settings, rng);
  });
  return out;
}

}  // namespace batchrl
