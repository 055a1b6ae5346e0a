#include "nlagg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nlagg {
namespace {

struct Samples {
  std::vector<KernelSamples> kernels;     // N x N, row-major
  std::vector<KernelSamples> mollifiers;  // N
  int max_radius = 0;
};

Samples sample_model(const InteractionModel& model, const Grid2D& grid) {
  const int N = model.species();
  Samples s;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      s.kernels.push_back(interaction_kernel(model, i, j, grid));
      s.max_radius = std::max(s.max_radius, s.kernels.back().radius());
    }
  for (int i = 0; i < N; ++i) {
    s.mollifiers.push_back(sample_mollifier(model.mollifiers[i], model.epsilon, grid.dx(), grid.n - 1));
    s.max_radius = std::max(s.max_radius, s.mollifiers.back().radius());
  }
  return s;
}

std::string at_time(double t) {
  std::ostringstream os;
  os.precision(17);
  os << " at t = " << t;
  return os.str();
}

Eigen::ArrayXXd minmod_slopes_x(const Eigen::ArrayXXd& u) {
  const Eigen::Index n = u.rows();
  Eigen::ArrayXXd s = Eigen::ArrayXXd::Zero(u.rows(), u.cols());
  const Eigen::ArrayXXd left = u.middleRows(1, n - 2) - u.topRows(n - 2);
  const Eigen::ArrayXXd right = u.bottomRows(n - 2) - u.middleRows(1, n - 2);
  s.middleRows(1, n - 2) =
      (left * right <= 0.0).select(0.0, (left.abs() < right.abs()).select(left, right));
  return s;
}

Eigen::ArrayXXd minmod_slopes_y(const Eigen::ArrayXXd& u) {
  const Eigen::Index n = u.cols();
  Eigen::ArrayXXd s = Eigen::ArrayXXd::Zero(u.rows(), u.cols());
  const Eigen::ArrayXXd down = u.middleCols(1, n - 2) - u.leftCols(n - 2);
  const Eigen::ArrayXXd up = u.rightCols(n - 2) - u.middleCols(1, n - 2);
  s.middleCols(1, n - 2) = (down * up <= 0.0).select(0.0, (down.abs() < up.abs()).select(down, up));
  return s;
}

void check_compatible(const SpeciesState& state, const PotentialStrategy& strategy) {
  if (state.fields.empty()) throw std::invalid_argument("solver: state has no species");
  if (state.species() != strategy.species())
    throw std::invalid_argument("solver: strategy has " + std::to_string(strategy.species()) +
                                " species, state has " + std::to_string(state.species()));
  for (const auto& f : state.fields)
    if (!(f.grid == state.grid())) throw std::invalid_argument("solver: species live on different grids");
  if (strategy.is_nonlocal() && !(strategy.nonlocal_operator().grid() == state.grid()))
    throw std::invalid_argument("solver: nonlocal operator was built for a different grid");
}

}  // namespace

double SpeciesState::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : fields) m = std::min(m, f.values.minCoeff());
  return m;
}

NonlocalOperator::NonlocalOperator(const InteractionModel& model, const Grid2D& grid)
    : model_(model), grid_(grid), gamma_(gamma_matrix(model.A)) {
  Samples s = sample_model(model, grid);
  conv_ = std::make_unique<Convolver>(grid, s.max_radius);
  for (const auto& k : s.kernels) kernel_hat_.push_back(conv_->transform_kernel(k));
  for (const auto& m : s.mollifiers) mollifier_hat_.push_back(conv_->transform_kernel(m));
  mollifier_samples_ = std::move(s.mollifiers);
}

std::vector<Field> NonlocalOperator::potentials(const std::vector<Field>& u) const {
  const std::size_t N = u.size();
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Spectrum> uh;
  uh.reserve(N);
  for (const auto& f : u) uh.push_back(conv_->forward(f));
  std::vector<Field> xi;
  xi.reserve(N);
  Spectrum acc(uh.front().rows(), uh.front().cols());
  for (std::size_t i = 0; i < N; ++i) {
    acc = kernel_hat_[i * N] * uh[0];
    for (std::size_t j = 1; j < N; ++j) acc += kernel_hat_[i * N + j] * uh[j];
    xi.push_back(conv_->inverse(acc));
  }
  return xi;
}

std::vector<Field> NonlocalOperator::mollified(const std::vector<Field>& u) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Field> out;
  out.reserve(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out.push_back(conv_->inverse(mollifier_hat_[i] * conv_->forward(u[i])));
  return out;
}

double NonlocalOperator::energy_direct(const std::vector<Field>& u) const {
  const auto xi = potentials(u);
  double e = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) e += (u[i].values * xi[i].values).sum();
  return e * grid_.cell_area();
}

double NonlocalOperator::energy_factored(const std::vector<Field>& u) const {
  // rho * u spills past the domain, so the squares are summed over the grid
  // grown by the widest mollifier on every side
  int R = 0;
  for (const auto& m : mollifier_samples_) R = std::max(R, m.radius());
  const int n = grid_.n;
  const double pad = R * grid_.dx();
  const Grid2D ext{grid_.x_min - pad, grid_.x_max + pad, grid_.y_min - pad, grid_.y_max + pad, n + 2 * R};
  std::vector<Field> m;
  m.reserve(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    Field host(ext);
    host.values.block(R, R, n, n) = u[i].values;
    KernelSamples rho = mollifier_samples_[i];
    rho.dx = ext.dx();  // same spacing up to rounding in the bounds
    m.push_back(convolve(host, rho));
  }
  double e = 0.0;
  for (Eigen::Index k = 0; k < model_.A.rows(); ++k) {
    Eigen::ArrayXXd w = Eigen::ArrayXXd::Zero(ext.n, ext.n);
    for (std::size_t i = 0; i < m.size(); ++i) w += model_.A(k, static_cast<Eigen::Index>(i)) * m[i].values;
    e += w.square().sum();
  }
  return e * grid_.cell_area();
}

PotentialStrategy PotentialStrategy::nonlocal(const InteractionModel& model, const Grid2D& grid) {
  PotentialStrategy s;
  s.op_ = std::make_shared<const NonlocalOperator>(model, grid);
  s.gamma_ = s.op_->gamma();
  return s;
}

PotentialStrategy PotentialStrategy::local(const Eigen::MatrixXd& gamma) {
  if (gamma.rows() != gamma.cols() || gamma.rows() == 0)
    throw std::invalid_argument("local strategy: gamma must be a nonempty square matrix");
  PotentialStrategy s;
  s.gamma_ = gamma;
  return s;
}

const NonlocalOperator& PotentialStrategy::nonlocal_operator() const {
  if (!op_) throw std::logic_error("strategy: local strategy has no nonlocal operator");
  return *op_;
}

void SchemeParams::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("scheme: cfl must lie in (0, 1]");
  if (!(max_dt > 0.0)) throw std::invalid_argument("scheme: max_dt must be positive");
}

std::vector<Field> compute_potentials(const SpeciesState& state, const PotentialStrategy& strategy) {
  check_compatible(state, strategy);
  if (strategy.is_nonlocal()) return strategy.nonlocal_operator().potentials(state.fields);
  const auto& G = strategy.gamma();
  const int N = state.species();
  std::vector<Field> xi;
  xi.reserve(N);
  for (int i = 0; i < N; ++i) {
    Field f(state.grid());
    for (int j = 0; j < N; ++j)
      if (G(i, j) != 0.0) f.values += G(i, j) * state.fields[j].values;
    xi.push_back(std::move(f));
  }
  return xi;
}

StepResult advance_step(const SpeciesState& state, const PotentialStrategy& strategy,
                        const SchemeParams& params, double max_step) {
  params.validate();
  check_compatible(state, strategy);
  const Grid2D& g = state.grid();
  const int n = g.n;
  const int N = state.species();
  const double dx = g.dx();

  double umax = 0.0;
  for (const auto& f : state.fields) {
    if (!f.all_finite()) throw BlowUpError("solver: non-finite density" + at_time(state.time), state.time);
    umax = std::max(umax, f.values.maxCoeff());
  }
  if (umax > kBlowUpThreshold)
    throw BlowUpError("solver: density exceeds blow-up threshold" + at_time(state.time), state.time);

  const auto xi = compute_potentials(state, strategy);
  std::vector<EdgeVectorField> vel;
  vel.reserve(N);
  double vmax = 0.0;
  for (int i = 0; i < N; ++i) {
    EdgeVectorField e = gradient_at_edges(xi[i]);
    e.x_edges = -e.x_edges;
    e.y_edges = -e.y_edges;
    vmax = std::max({vmax, e.x_edges.abs().maxCoeff(), e.y_edges.abs().maxCoeff()});
    vel.push_back(std::move(e));
  }
  if (!std::isfinite(vmax) || vmax > kBlowUpThreshold)
    throw BlowUpError("solver: edge velocity blew up" + at_time(state.time), state.time);

  const double inf = std::numeric_limits<double>::infinity();
  double dt = params.max_dt;
  if (vmax > 0.0) dt = std::min(dt, params.cfl * dx / (2.0 * vmax));
  if (params.diffusive_bound) {
    const Eigen::VectorXd row_sums = strategy.gamma().cwiseAbs().rowwise().sum();
    double D = 0.0;
    for (int i = 0; i < N; ++i) D = std::max(D, state.fields[i].values.maxCoeff() * row_sums(i));
    if (D > 0.0) dt = std::min(dt, params.cfl * dx * dx / (4.0 * D));
  }
  if (dt < kMinTimeStep)
    throw StagnationError("solver: time step underflow (dt = " + std::to_string(dt) + ")" + at_time(state.time),
                          state.time);
  if (max_step < inf) dt = std::min(dt, max_step);

  const double lambda = dt / dx;
  StepResult res;
  res.dt = dt;
  res.state.time = state.time + dt;
  res.state.fields.reserve(N);
  for (int s = 0; s < N; ++s) {
    const Eigen::ArrayXXd& u = state.fields[s].values;
    const Eigen::ArrayXXd& vx = vel[s].x_edges;
    const Eigen::ArrayXXd& vy = vel[s].y_edges;

    Eigen::ArrayXXd sx, sy;
    if (params.limiter == Limiter::minmod) {
      sx = 0.5 * minmod_slopes_x(u);
      sy = 0.5 * minmod_slopes_y(u);
    } else {
      sx = Eigen::ArrayXXd::Zero(n, n);
      sy = Eigen::ArrayXXd::Zero(n, n);
    }
    const Eigen::ArrayXXd u_east = u + sx, u_west = u - sx;
    const Eigen::ArrayXXd u_north = u + sy, u_south = u - sy;

    // fx_pos: flux through x-edge e carried left-to-right, fx_neg right-to-left
    Eigen::ArrayXXd fx_pos = Eigen::ArrayXXd::Zero(n + 1, n), fx_neg = Eigen::ArrayXXd::Zero(n + 1, n);
    Eigen::ArrayXXd fy_pos = Eigen::ArrayXXd::Zero(n, n + 1), fy_neg = Eigen::ArrayXXd::Zero(n, n + 1);
    fx_pos.middleRows(1, n - 1) = vx.middleRows(1, n - 1).max(0.0) * u_east.topRows(n - 1);
    fx_neg.middleRows(1, n - 1) = (-vx.middleRows(1, n - 1)).max(0.0) * u_west.bottomRows(n - 1);
    fy_pos.middleCols(1, n - 1) = vy.middleCols(1, n - 1).max(0.0) * u_north.leftCols(n - 1);
    fy_neg.middleCols(1, n - 1) = (-vy.middleCols(1, n - 1)).max(0.0) * u_south.rightCols(n - 1);

    // grouped per axis so the update is exactly equivariant under reflection
    const Eigen::ArrayXXd out = (fx_pos.bottomRows(n) + fx_neg.topRows(n)) + (fy_pos.rightCols(n) + fy_neg.leftCols(n));
    const Eigen::ArrayXXd in = (fx_neg.bottomRows(n) + fx_pos.topRows(n)) + (fy_neg.rightCols(n) + fy_pos.leftCols(n));
    res.state.fields.emplace_back(g, ((u - lambda * out) + lambda * in).eval());
  }
  return res;
}

SpeciesState run_to_time(SpeciesState state, const PotentialStrategy& strategy, const SchemeParams& params,
                         double t_end, const RunObservers& observers) {
  if (t_end < state.time) throw std::invalid_argument("run_to_time: t_end precedes the state time");
  std::vector<double> outs;
  for (double t : observers.output_times)
    if (t >= state.time && t <= t_end) outs.push_back(t);
  std::sort(outs.begin(), outs.end());
  outs.erase(std::unique(outs.begin(), outs.end()), outs.end());

  auto emit = [&](const SpeciesState& s) {
    for (const auto& cb : observers.on_output) cb(s);
  };

  std::size_t next = 0;
  if (next < outs.size() && outs[next] == state.time) {
    emit(state);
    ++next;
  }
  while (state.time < t_end) {
    const double target = next < outs.size() ? outs[next] : t_end;
    const double remaining = target - state.time;
    StepResult r = advance_step(state, strategy, params, remaining);
    const bool landed = r.dt >= remaining;
    state = std::move(r.state);
    if (landed) state.time = target;
    for (const auto& cb : observers.on_step) cb(state, r.dt);
    if (landed && next < outs.size()) {
      emit(state);
      ++next;
    }
  }
  return state;
}

}  // namespace nlagg
