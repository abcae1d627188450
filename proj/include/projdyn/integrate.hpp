#pragma once

// Numerical integration of screen dynamics, primarily in bivector form
// (qdot = dh(q) -| pi, pidot = f(q)) with the second-order form
// (qddot = f_h(q) + lambda q) retained as a cross-check. Trajectories keep the
// accepted-step skeleton with endpoint derivatives, so dense output, event
// refinement and transport between screens work at integration accuracy.

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

#include "projdyn/errors.hpp"
#include "projdyn/exterior.hpp"
#include "projdyn/force.hpp"
#include "projdyn/screen.hpp"

namespace projdyn {

enum class Method { DormandPrince54, RungeKutta4 };

enum class Termination { TimeLimit, Singularity, DomainExit };

struct IntegratorConfig {
  Method method = Method::DormandPrince54;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double fixed_step = 1e-3;  // RungeKutta4 only
  long max_steps = 10'000'000;
  bool renormalize = true;
  double singularity_cutoff = 1e-6;
  int output_samples = 256;
  std::vector<double> output_times;  // overrides output_samples when set

  void validate() const;
};

struct Event {
  double t = 0.0;
  std::string kind;
  Multivectord q;   // state at the event
  Multivectord pi;
};

class Trajectory {
 public:
  enum class Formulation { Bivector, SecondOrder };

  /// Accepted integration step endpoint with its derivative (Hermite data).
  struct Node {
    double t = 0.0;
    Eigen::VectorXd y;
    Eigen::VectorXd ydot;
  };

  struct Sample {
    double t = 0.0;
    Multivectord q;
    Multivectord pi;
  };

  /// Full state at a node or interpolation point.
  struct State {
    Multivectord q, pi, qdot, pidot;
  };

  Trajectory(ScreenSpec screen, Formulation form, int dim)
      : screen_(std::move(screen)), form_(form), dim_(dim) {}

  const ScreenSpec& screen() const { return screen_; }
  Formulation formulation() const { return form_; }
  int dim() const { return dim_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<Event>& events() const { return events_; }
  Termination terminated_by() const { return terminated_by_; }

  double t_begin() const { return nodes_.front().t; }
  double t_reached() const { return nodes_.back().t; }

  /// Decode a raw state vector into (q, pi, qdot, pidot).
  State decode(const Eigen::VectorXd& y, const Eigen::VectorXd& ydot) const;

  State node_state(std::size_t k) const;

  /// Cubic Hermite interpolation between accepted steps.
  State state_at(double t) const;

  /// Interpolate the raw state vector at t (no decoding).
  Eigen::VectorXd raw_state_at(double t) const;

  // populated by the integrator / transport
  std::vector<Node>& mutable_nodes() { return nodes_; }
  std::vector<Sample>& mutable_samples() { return samples_; }
  std::vector<Event>& mutable_events() { return events_; }
  void set_termination(Termination t) { terminated_by_ = t; }

 private:
  ScreenSpec screen_;
  Formulation form_;
  int dim_;
  std::vector<Node> nodes_;
  std::vector<Sample> samples_;
  std::vector<Event> events_;
  Termination terminated_by_ = Termination::TimeLimit;
};

/// Integrate the bivector system from a projective state. The ray is
/// projected onto the screen; pi is used as-is after validation.
Trajectory integrate(const ForceFieldSpec& fs, const ScreenSpec& s,
                     const ProjectiveState& init, double t_end,
                     const IntegratorConfig& cfg = {});

Trajectory integrate(const ForceFieldSpec& fs, const ScreenSpec& s,
                     const ScreenState& init, double t_end,
                     const IntegratorConfig& cfg = {});

/// Integrate qddot = f_h(q) + lambda q with the radial reaction multiplier.
Trajectory integrate_second_order(const ForceFieldSpec& fs, const ScreenSpec& s,
                                  const ScreenState& init, double t_end,
                                  const IntegratorConfig& cfg = {});

/// Reparameterize a trajectory onto another screen: q1 = q / h1(q), pi
/// unchanged, new time tau with dtau/dt = h1(q)^{-2} accumulated by
/// quadrature over the step skeleton. Throws DomainError at the first sample
/// with h1(q) <= 0.
Trajectory transport_to_screen(const Trajectory& traj, const ScreenSpec& s1);

struct Crossing {
  double t = 0.0;
  ProjectiveState state;
};

/// Oriented crossings of the hyperplane <leaf, q> = 0: sign changes from
/// negative to positive, refined by bisection on the dense output and
/// re-projected onto the screen.
std::vector<Crossing> detect_crossings(const Trajectory& traj,
                                       const Formd& leaf);

}  // namespace projdyn
