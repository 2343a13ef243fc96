#include "strucgp/linear_structure.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

bool is_symmetric(const Eigen::MatrixXd& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Eigen::LLT<Eigen::MatrixXd> factor_mass(const Eigen::MatrixXd& mass) {
  if (!is_symmetric(mass)) throw ValidationError("mass matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(mass);
  if (llt.info() != Eigen::Success) throw FactorizationError("mass matrix is not positive definite");
  return llt;
}

Eigen::MatrixXd selector(const StructuralSystem& system) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(system.outputs(), system.dofs());
  for (Index r = 0; r < system.outputs(); ++r) s(r, system.observed_dofs[static_cast<std::size_t>(r)]) = 1.0;
  return s;
}

void check_theta(const StructuralSystem& system, const Eigen::VectorXd& theta) {
  if (theta.size() != system.parameters()) {
    throw ValidationError("theta has " + std::to_string(theta.size()) + " entries, model expects " +
                          std::to_string(system.parameters()));
  }
  if (!theta.allFinite()) throw ValidationError("theta contains non-finite entries");
}

void check_excitation(const StructuralSystem& system, const Excitation& excitation) {
  if (excitation.channels() != system.inputs()) {
    throw ValidationError("excitation has " + std::to_string(excitation.channels()) + " channels, input map expects " +
                          std::to_string(system.inputs()));
  }
  if (std::abs(excitation.dt - system.dt) > 1e-12 * std::max(1.0, std::abs(system.dt))) {
    throw ValidationError("excitation step differs from the system sampling interval");
  }
}

// Exact zero-order-hold discretization, optionally with the derivative of the discrete map with
// respect to each affine stiffness parameter (Van Loan block exponential).
struct Discretization {
  Eigen::MatrixXd ad, bd, cd, dd;
  std::vector<Eigen::MatrixXd> dad, dbd, dcd;
};

Discretization discretize(const StructuralSystem& system, const Eigen::VectorXd& theta, bool with_derivatives) {
  const Index n = system.dofs();
  const Index s = 2 * n;
  const Index p = system.inputs();
  const double dt = system.dt;

  const auto mass_llt = factor_mass(system.mass);
  const Eigen::MatrixXd k = system.stiffness(theta);
  const Eigen::MatrixXd minv_k = mass_llt.solve(k);
  const Eigen::MatrixXd minv_c = mass_llt.solve(system.damping);
  const Eigen::MatrixXd minv_l = mass_llt.solve(system.input_map);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s, s);
  a.topRightCorner(n, n).setIdentity();
  a.bottomLeftCorner(n, n) = -minv_k;
  a.bottomRightCorner(n, n) = -minv_c;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(s, p);
  b.bottomRows(n) = minv_l;

  const Eigen::MatrixXd sel = selector(system);
  Discretization d;
  d.cd.resize(system.outputs(), s);
  d.cd.leftCols(n) = -sel * minv_k;
  d.cd.rightCols(n) = -sel * minv_c;
  d.dd = sel * minv_l;

  if (!with_derivatives || system.parameters() == 0) {
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(s + p, s + p);
    big.topLeftCorner(s, s) = a * dt;
    big.topRightCorner(s, p) = b * dt;
    const Eigen::MatrixXd e = big.exp();
    d.ad = e.topLeftCorner(s, s);
    d.bd = e.topRightCorner(s, p);
    return d;
  }

  for (Index j = 0; j < system.parameters(); ++j) {
    const Eigen::MatrixXd minv_kj = mass_llt.solve(system.stiffness.term(j));
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(s, s);
    da.bottomLeftCorner(n, n) = -minv_kj;

    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2 * s + p, 2 * s + p);
    big.block(0, 0, s, s) = a * dt;
    big.block(s, 0, s, s) = da * dt;
    big.block(s, s, s, s) = a * dt;
    big.block(0, 2 * s, s, p) = b * dt;
    const Eigen::MatrixXd e = big.exp();
    if (j == 0) {
      d.ad = e.block(0, 0, s, s);
      d.bd = e.block(0, 2 * s, s, p);
    }
    d.dad.push_back(e.block(s, 0, s, s));
    d.dbd.push_back(e.block(s, 2 * s, s, p));
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(system.outputs(), s);
    dc.leftCols(n) = -sel * minv_kj;
    d.dcd.push_back(std::move(dc));
  }
  return d;
}

Eigen::VectorXd resolve_initial_state(const StructuralSystem& system, const Eigen::VectorXd& initial_state) {
  if (initial_state.size() == 0) return Eigen::VectorXd::Zero(2 * system.dofs());
  if (initial_state.size() != 2 * system.dofs()) {
    throw ValidationError("initial state must have 2*n_dof entries");
  }
  return initial_state;
}

SimulationResult run(const Discretization& d, const Excitation& excitation, const Eigen::VectorXd& x0,
                     bool with_sensitivities) {
  const Index samples = excitation.samples();
  const Index outputs = d.cd.rows();
  const Index params = with_sensitivities ? static_cast<Index>(d.dad.size()) : 0;
  const Index s = d.ad.rows();

  SimulationResult out;
  out.response.resize(samples, outputs);
  if (with_sensitivities) out.sensitivities.resize(samples * outputs, params);

  // Column 0 is the state, column j+1 its derivative with respect to θ_j.
  Eigen::MatrixXd state = Eigen::MatrixXd::Zero(s, 1 + params);
  state.col(0) = x0;
  Eigen::MatrixXd forcing(s, 1 + params);
  for (Index k = 0; k < samples; ++k) {
    const Eigen::VectorXd f = excitation.values.row(k).transpose();
    out.response.row(k).noalias() = (d.cd * state.col(0) + d.dd * f).transpose();
    forcing.col(0).noalias() = d.bd * f;
    for (Index j = 0; j < params; ++j) {
      const Eigen::VectorXd dy = d.cd * state.col(j + 1) + d.dcd[static_cast<std::size_t>(j)] * state.col(0);
      for (Index c = 0; c < outputs; ++c) out.sensitivities(c * samples + k, j) = dy(c);
      forcing.col(j + 1).noalias() =
          d.dad[static_cast<std::size_t>(j)] * state.col(0) + d.dbd[static_cast<std::size_t>(j)] * f;
    }
    state = d.ad * state + forcing;
  }
  out.final_state = state.col(0);
  return out;
}

}  // namespace

Eigen::VectorXd stack_channels(const Eigen::MatrixXd& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
}

Eigen::MatrixXd unstack_channels(const Eigen::VectorXd& stacked, Index channels) {
  if (channels <= 0 || stacked.size() % channels != 0) {
    throw ValidationError("stacked vector length is not a multiple of the channel count");
  }
  return Eigen::Map<const Eigen::MatrixXd>(stacked.data(), stacked.size() / channels, channels);
}

StiffnessModel::StiffnessModel(Eigen::MatrixXd base, std::vector<Eigen::MatrixXd> terms)
    : base_(std::move(base)), terms_(std::move(terms)), parameters_(static_cast<Index>(terms_.size())),
      dofs_(base_.rows()) {
  if (!is_symmetric(base_)) throw ValidationError("stiffness base matrix is not symmetric");
  for (const auto& t : terms_) {
    if (t.rows() != dofs_ || t.cols() != dofs_) throw ValidationError("stiffness term has the wrong size");
    if (!is_symmetric(t)) throw ValidationError("stiffness term is not symmetric");
  }
}

StiffnessModel::StiffnessModel(Builder builder, Index parameters, Index dofs)
    : builder_(std::move(builder)), parameters_(parameters), dofs_(dofs) {
  if (!builder_) throw ValidationError("empty stiffness builder");
}

Eigen::MatrixXd StiffnessModel::operator()(const Eigen::VectorXd& theta) const {
  if (theta.size() != parameters_) throw ValidationError("theta size does not match the stiffness model");
  if (builder_) {
    Eigen::MatrixXd k = builder_(theta);
    if (k.rows() != dofs_ || !is_symmetric(k)) throw ValidationError("stiffness builder returned a non-symmetric matrix");
    return k;
  }
  Eigen::MatrixXd k = base_;
  for (Index j = 0; j < parameters_; ++j) k += theta(j) * terms_[static_cast<std::size_t>(j)];
  return k;
}

const Eigen::MatrixXd& StiffnessModel::term(Index j) const {
  if (builder_) throw ValidationError("stiffness model is not affine in theta");
  if (j < 0 || j >= parameters_) throw ValidationError("stiffness term index out of range");
  return terms_[static_cast<std::size_t>(j)];
}

void StructuralSystem::validate() const {
  const Index n = dofs();
  if (n == 0 || mass.cols() != n) throw ValidationError("mass matrix must be square and non-empty");
  factor_mass(mass);
  if (damping.rows() != n || damping.cols() != n) throw ValidationError("damping matrix has the wrong size");
  if (!is_symmetric(damping)) throw ValidationError("damping matrix is not symmetric");
  if (stiffness.dofs() != n) throw ValidationError("stiffness model size differs from the mass matrix");
  if (input_map.rows() != n) throw ValidationError("input map must have n_dof rows");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sampling interval must be positive");
  if (observed_dofs.empty()) throw ValidationError("at least one observed DOF is required");
  std::set<Index> seen;
  for (Index dof : observed_dofs) {
    if (dof < 0 || dof >= n) throw ValidationError("observed DOF index out of range");
    if (!seen.insert(dof).second) throw ValidationError("observed DOFs must be distinct");
  }
}

Eigen::MatrixXd shear_stiffness(const Eigen::VectorXd& story_stiffness) {
  const Index n = story_stiffness.size();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) += story_stiffness(i);
    if (i + 1 < n) {
      k(i, i) += story_stiffness(i + 1);
      k(i, i + 1) = -story_stiffness(i + 1);
      k(i + 1, i) = -story_stiffness(i + 1);
    }
  }
  return k;
}

Eigen::MatrixXd assemble_damping(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& stiffness,
                                 const DampingSpec& damping) {
  if (const auto* rayleigh = std::get_if<RayleighDamping>(&damping)) {
    return rayleigh->alpha * stiffness + rayleigh->beta * mass;
  }
  const auto& modal = std::get<ModalDamping>(damping);
  const Index n = mass.rows();
  if (modal.ratios.size() != n) throw ValidationError("modal damping needs one ratio per DOF");
  if ((modal.ratios.array() < 0.0).any()) throw ValidationError("modal damping ratios must be non-negative");

  Eigen::VectorXd omega = modal.frequencies;
  Eigen::MatrixXd shapes = modal.shapes;
  if (omega.size() == 0 || shapes.size() == 0) {
    const ModalProperties undamped = modal_properties(mass, stiffness, Eigen::MatrixXd::Zero(n, n));
    if (omega.size() == 0) omega = undamped.frequencies;
    if (shapes.size() == 0) shapes = undamped.shapes;
  }
  if (omega.size() != n || shapes.rows() != n || shapes.cols() != n) {
    throw ValidationError("modal damping needs n_dof frequencies and an n_dof x n_dof shape matrix");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(shapes);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(n - 1) <= 1e-10 * sv(0)) throw ValidationError("mode-shape set is rank deficient");

  const Eigen::MatrixXd modal_mass = shapes.transpose() * mass * shapes;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double normalized = modal_mass(i, j) / std::sqrt(modal_mass(i, i) * modal_mass(j, j));
      if (std::abs(normalized) > 1e-6) throw ValidationError("mode shapes are not mass-orthogonal");
    }
  }

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd m_phi = mass * shapes.col(i);
    c += (2.0 * omega(i) * modal.ratios(i) / modal_mass(i, i)) * (m_phi * m_phi.transpose());
  }
  return 0.5 * (c + c.transpose());
}

StructuralSystem build_scaled_shear_frame(const Eigen::VectorXd& masses, const Eigen::VectorXd& story_stiffness,
                                          const std::vector<Index>& scaled_stories,
                                          const Eigen::VectorXd& theta_nominal, const DampingSpec& damping,
                                          double dt) {
  const Index n = masses.size();
  if (n == 0) throw ValidationError("at least one mass is required");
  if ((masses.array() <= 0.0).any() || !masses.allFinite()) throw ValidationError("masses must be strictly positive");
  if (story_stiffness.size() != n) throw ValidationError("one story stiffness per mass is required");
  if ((story_stiffness.array() <= 0.0).any()) throw ValidationError("story stiffnesses must be strictly positive");
  if (theta_nominal.size() != static_cast<Index>(scaled_stories.size())) {
    throw ValidationError("nominal theta must have one entry per scaled story");
  }
  if ((theta_nominal.array() <= 0.0).any()) throw ValidationError("theta entries must be strictly positive");

  std::vector<bool> scaled(static_cast<std::size_t>(n), false);
  std::vector<Eigen::MatrixXd> terms;
  for (Index story : scaled_stories) {
    if (story < 0 || story >= n) throw ValidationError("scaled story index out of range");
    scaled[static_cast<std::size_t>(story)] = true;
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    unit(story) = story_stiffness(story);
    terms.push_back(shear_stiffness(unit));
  }
  Eigen::VectorXd fixed = story_stiffness;
  for (Index i = 0; i < n; ++i) {
    if (scaled[static_cast<std::size_t>(i)]) fixed(i) = 0.0;
  }

  StructuralSystem system;
  system.mass = masses.asDiagonal();
  system.stiffness = StiffnessModel(shear_stiffness(fixed), std::move(terms));
  system.damping = assemble_damping(system.mass, system.stiffness(theta_nominal), damping);
  system.input_map = -system.mass * Eigen::VectorXd::Ones(n);
  system.observed_dofs.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) system.observed_dofs[static_cast<std::size_t>(i)] = i;
  system.dt = dt;
  system.validate();
  return system;
}

StructuralSystem build_shear_frame(const Eigen::VectorXd& masses, const Eigen::VectorXd& theta,
                                   const DampingSpec& damping, double dt) {
  std::vector<Index> stories(static_cast<std::size_t>(masses.size()));
  for (Index i = 0; i < masses.size(); ++i) stories[static_cast<std::size_t>(i)] = i;
  if (theta.size() != masses.size()) throw ValidationError("theta must hold one stiffness per story");
  return build_scaled_shear_frame(masses, Eigen::VectorXd::Ones(masses.size()), stories, theta, damping, dt);
}

SimulationResult simulate(const StructuralSystem& system, const Excitation& excitation, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& initial_state, bool with_sensitivities, SensitivityMethod method) {
  system.validate();
  check_theta(system, theta);
  check_excitation(system, excitation);
  const Eigen::VectorXd x0 = resolve_initial_state(system, initial_state);

  if (!with_sensitivities) return run(discretize(system, theta, false), excitation, x0, false);
  if (method == SensitivityMethod::exact) {
    if (!system.stiffness.is_affine()) throw ValidationError("exact sensitivities need an affine stiffness model");
    return run(discretize(system, theta, true), excitation, x0, true);
  }
  SimulationResult out = run(discretize(system, theta, false), excitation, x0, false);
  out.sensitivities = response_sensitivities(system, excitation, theta, x0, {SensitivityMethod::central_difference});
  return out;
}

TimeSeries simulate_response(const StructuralSystem& system, const Excitation& excitation,
                             const Eigen::VectorXd& theta, const Eigen::VectorXd& initial_state) {
  TimeSeries out;
  out.t0 = excitation.t0;
  out.dt = excitation.dt;
  out.values = simulate(system, excitation, theta, initial_state, false).response;
  for (Index dof : system.observed_dofs) out.labels.push_back("dof" + std::to_string(dof));
  return out;
}

Eigen::MatrixXd response_sensitivities(const StructuralSystem& system, const Excitation& excitation,
                                       const Eigen::VectorXd& theta, const Eigen::VectorXd& initial_state,
                                       const SensitivityOptions& options) {
  if (options.method == SensitivityMethod::exact) {
    return simulate(system, excitation, theta, initial_state, true, SensitivityMethod::exact).sensitivities;
  }
  system.validate();
  check_theta(system, theta);
  check_excitation(system, excitation);
  const Eigen::VectorXd x0 = resolve_initial_state(system, initial_state);

  Eigen::MatrixXd j(excitation.samples() * system.outputs(), theta.size());
  for (Index p = 0; p < theta.size(); ++p) {
    const double h = std::max(options.relative_step * std::abs(theta(p)), options.absolute_step);
    Eigen::VectorXd plus = theta;
    Eigen::VectorXd minus = theta;
    plus(p) += h;
    minus(p) -= h;
    const double span = plus(p) - minus(p);
    if (!(h > 0.0) || !std::isfinite(h) || !(span > 0.0)) {
      throw ValidationError("finite-difference step underflows for theta[" + std::to_string(p) + "]");
    }
    const Eigen::MatrixXd up = run(discretize(system, plus, false), excitation, x0, false).response;
    const Eigen::MatrixXd down = run(discretize(system, minus, false), excitation, x0, false).response;
    j.col(p) = stack_channels((up - down) / span);
  }
  return j;
}

ModalProperties modal_properties(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& stiffness,
                                 const Eigen::MatrixXd& damping) {
  factor_mass(mass);
  if (!is_symmetric(stiffness) || stiffness.rows() != mass.rows()) {
    throw ValidationError("stiffness matrix must be symmetric and match the mass matrix");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(stiffness, mass);
  if (solver.info() != Eigen::Success) throw FactorizationError("generalized eigenproblem failed");
  const Eigen::VectorXd lambda = solver.eigenvalues();
  if ((lambda.array() <= 0.0).any()) throw ValidationError("stiffness matrix is not positive definite");

  ModalProperties out;
  const Index n = mass.rows();
  out.frequencies = lambda.cwiseSqrt();
  out.shapes = solver.eigenvectors();
  out.damping_ratios.resize(n);
  for (Index i = 0; i < n; ++i) {
    Eigen::VectorXd phi = out.shapes.col(i);
    phi /= std::sqrt(phi.dot(mass * phi));
    Index pivot = 0;
    phi.cwiseAbs().maxCoeff(&pivot);
    if (phi(pivot) < 0.0) phi = -phi;
    out.shapes.col(i) = phi;
    out.damping_ratios(i) = phi.dot(damping * phi) / (2.0 * out.frequencies(i));
  }
  return out;
}

ModalProperties modal_properties(const StructuralSystem& system, const Eigen::VectorXd& theta) {
  check_theta(system, theta);
  return modal_properties(system.mass, system.stiffness(theta), system.damping);
}

}  // namespace strucgp
