#include "projdyn/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace projdyn {

namespace {

using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Hermite interpolation

VectorXd hermite(double t, const Trajectory::Node& a, const Trajectory::Node& b) {
  double h = b.t - a.t;
  double th = (t - a.t) / h;
  double th2 = th * th, th3 = th2 * th;
  double h00 = 2 * th3 - 3 * th2 + 1;
  double h10 = th3 - 2 * th2 + th;
  double h01 = -2 * th3 + 3 * th2;
  double h11 = th3 - th2;
  return h00 * a.y + (h10 * h) * a.ydot + h01 * b.y + (h11 * h) * b.ydot;
}

VectorXd hermite_derivative(double t, const Trajectory::Node& a,
                            const Trajectory::Node& b) {
  double h = b.t - a.t;
  double th = (t - a.t) / h;
  double th2 = th * th;
  double d00 = (6 * th2 - 6 * th) / h;
  double d10 = 3 * th2 - 4 * th + 1;
  double d01 = (-6 * th2 + 6 * th) / h;
  double d11 = 3 * th2 - 2 * th;
  return d00 * a.y + d10 * a.ydot + d01 * b.y + d11 * b.ydot;
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr double kGaussX[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGaussW[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};

// ---------------------------------------------------------------------------
// Right-hand sides

struct BivectorSystem {
  const ForceFieldSpec* fs;
  const ScreenSpec* s;
  int dim;
  int npi;

  VectorXd operator()(const VectorXd& y) const {
    Multivectord q = Multivectord::vector(y.head(dim).eval());
    ScreenEval ev = s->eval(q);
    Multivectord pi(dim, 2, y.tail(npi).eval());
    Multivectord v = interior_coform(ev.dh, pi);
    Multivectord f = fs->eval(q);
    VectorXd out(y.size());
    out.head(dim) = v.coeffs();
    out.tail(npi) = f.coeffs();
    return out;
  }

  void renormalize(VectorXd& y) const {
    Multivectord q = Multivectord::vector(y.head(dim).eval());
    double h = s->value(q);
    if (!(h > 0.0)) throw DomainError("renormalize: h(q) <= 0");
    q /= h;
    ScreenEval ev = s->eval(q);
    Multivectord pi(dim, 2, y.tail(npi).eval());
    Multivectord v = interior_coform(ev.dh, pi);
    y.head(dim) = q.coeffs();
    y.tail(npi) = wedge(q, v).coeffs();
  }
};

struct SecondOrderSystem {
  const ForceFieldSpec* fs;
  const ScreenSpec* s;
  int dim;

  VectorXd operator()(const VectorXd& y) const {
    Multivectord q = Multivectord::vector(y.head(dim).eval());
    Multivectord qdot = Multivectord::vector(y.tail(dim).eval());
    ScreenEval ev = s->eval(q);
    Multivectord fh = interior_coform(ev.dh, fs->eval(q));
    double lambda = -qdot.coeffs().dot(ev.hess * qdot.coeffs()) / ev.h;
    VectorXd out(y.size());
    out.head(dim) = qdot.coeffs();
    out.tail(dim) = fh.coeffs() + lambda * q.coeffs();
    return out;
  }

  void renormalize(VectorXd& y) const {
    Multivectord q = Multivectord::vector(y.head(dim).eval());
    double h = s->value(q);
    if (!(h > 0.0)) throw DomainError("renormalize: h(q) <= 0");
    q /= h;
    ScreenEval ev = s->eval(q);
    VectorXd qdot = y.tail(dim);
    double proj = ev.dh.coeffs().dot(qdot) / pair(ev.dh, q);
    y.head(dim) = q.coeffs();
    y.tail(dim) = qdot - proj * q.coeffs();
  }
};

// ---------------------------------------------------------------------------
// Shared integration driver

struct StageFailure {
  Termination reason;
  std::string what;
};

template <typename System>
class Driver {
 public:
  Driver(const System& sys, const ForceFieldSpec& fs,
         const IntegratorConfig& cfg, Trajectory& traj)
      : sys_(sys), fs_(fs), cfg_(cfg), traj_(traj) {}

  void run(const VectorXd& y0, double t_end) {
    VectorXd y = y0;
    check_initial(y);
    VectorXd ydot = sys_(y);  // unusable initial states throw here
    traj_.mutable_nodes().push_back({0.0, y, ydot});

    if (cfg_.method == Method::RungeKutta4)
      run_rk4(y, ydot, t_end);
    else
      run_dopri(y, ydot, t_end);
  }

 private:
  VectorXd eval_stage(const VectorXd& y) const {
    try {
      return sys_(y);
    } catch (const SingularityError& e) {
      throw StageFailure{Termination::Singularity, e.what()};
    } catch (const DomainError& e) {
      throw StageFailure{Termination::DomainExit, e.what()};
    }
  }

  void check_initial(const VectorXd& y) const {
    Multivectord q = Multivectord::vector(y.head(traj_.dim()).eval());
    switch (fs_.domain_status(q)) {
      case FieldDomainStatus::Singular:
        throw SingularityError(
            "integrate: initial state within the singularity cutoff");
      case FieldDomainStatus::Outside:
        throw DomainError("integrate: initial state outside the field domain");
      case FieldDomainStatus::Ok:
        break;
    }
  }

  void terminate(Termination reason, double t) {
    traj_.set_termination(reason);
    if (reason == Termination::TimeLimit) return;
    Event ev;
    ev.t = t;
    ev.kind = reason == Termination::Singularity ? "singularity" : "domain-exit";
    if (!traj_.nodes().empty()) {
      auto st = traj_.node_state(traj_.nodes().size() - 1);
      ev.q = st.q;
      ev.pi = st.pi;
    }
    traj_.mutable_events().push_back(std::move(ev));
  }

  /// Accept a step at time t: renormalize, store the node with a fresh
  /// derivative, stop if the state reached a terminal region.
  bool accept(double t, VectorXd y, const VectorXd& fallback_ydot) {
    if (cfg_.renormalize) {
      try {
        sys_.renormalize(y);
      } catch (const std::exception&) {
        traj_.mutable_nodes().push_back({t, y, fallback_ydot});
        terminate(Termination::DomainExit, t);
        return false;
      }
    }
    Multivectord q = Multivectord::vector(y.head(traj_.dim()).eval());
    Termination reason = Termination::TimeLimit;
    switch (fs_.domain_status(q)) {
      case FieldDomainStatus::Singular:
        reason = Termination::Singularity;
        break;
      case FieldDomainStatus::Outside:
        reason = Termination::DomainExit;
        break;
      case FieldDomainStatus::Ok:
        break;
    }
    VectorXd ydot;
    try {
      ydot = sys_(y);
    } catch (const SingularityError&) {
      ydot = fallback_ydot;
      if (reason == Termination::TimeLimit) reason = Termination::Singularity;
    } catch (const DomainError&) {
      ydot = fallback_ydot;
      if (reason == Termination::TimeLimit) reason = Termination::DomainExit;
    }
    traj_.mutable_nodes().push_back({t, y, ydot});
    if (reason != Termination::TimeLimit) {
      terminate(reason, t);
      return false;
    }
    return true;
  }

  void run_rk4(VectorXd y, VectorXd ydot, double t_end) {
    double t = 0.0;
    long steps = 0;
    while (t < t_end) {
      if (++steps > cfg_.max_steps)
        throw StiffnessError("integrate: step budget exhausted");
      double h = std::min({cfg_.fixed_step, cfg_.max_step, t_end - t});
      VectorXd k2, k3, k4;
      try {
        k2 = eval_stage(y + 0.5 * h * ydot);
        k3 = eval_stage(y + 0.5 * h * k2);
        k4 = eval_stage(y + h * k3);
      } catch (const StageFailure& f) {
        terminate(f.reason, t);
        return;
      }
      VectorXd ynew = y + (h / 6.0) * (ydot + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
      if (!accept(t, std::move(ynew), k4)) return;
      y = traj_.nodes().back().y;
      ydot = traj_.nodes().back().ydot;
    }
    traj_.set_termination(Termination::TimeLimit);
  }

  void run_dopri(VectorXd y, VectorXd ydot, double t_end) {
    // Dormand-Prince 5(4) pair, FSAL
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 35.0 / 384 - 5179.0 / 57600,
                        e3 = 500.0 / 1113 - 7571.0 / 16695,
                        e4 = 125.0 / 192 - 393.0 / 640,
                        e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    double t = 0.0;
    double h = initial_step(y, ydot, t_end);
    long steps = 0;
    bool limit_growth = false;
    bool stage_blocked = false;
    Termination blocked_reason = Termination::TimeLimit;

    while (t < t_end) {
      if (++steps > cfg_.max_steps)
        throw StiffnessError("integrate: step budget exhausted");
      h = std::min({h, cfg_.max_step, t_end - t});
      double hmin = 16.0 * std::numeric_limits<double>::epsilon() *
                    std::max(std::abs(t), 1.0);
      if (h < hmin) {
        if (stage_blocked) {
          // pinned against a singular or out-of-domain region
          terminate(blocked_reason, t);
          return;
        }
        throw StiffnessError("integrate: step size underflow at t = " +
                             std::to_string(t));
      }

      const VectorXd& k1 = ydot;
      VectorXd k2, k3, k4, k5, k6, k7, y5;
      try {
        k2 = eval_stage(y + h * (a21 * k1));
        k3 = eval_stage(y + h * (a31 * k1 + a32 * k2));
        k4 = eval_stage(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        k5 = eval_stage(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = eval_stage(
            y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = eval_stage(y5);
      } catch (const StageFailure& f) {
        stage_blocked = true;
        blocked_reason = f.reason;
        h *= 0.5;
        limit_growth = true;
        continue;
      }
      stage_blocked = false;

      double errnorm = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double err = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                          e6 * k6[i] + e7 * k7[i]);
        double sc = cfg_.abs_tol +
                    cfg_.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
        double r = err / sc;
        errnorm += r * r;
      }
      errnorm = std::sqrt(errnorm / static_cast<double>(y.size()));

      if (errnorm <= 1.0) {
        t += h;
        if (!accept(t, std::move(y5), k7)) return;
        y = traj_.nodes().back().y;
        ydot = traj_.nodes().back().ydot;
        double fac = 0.9 * std::pow(std::max(errnorm, 1e-10), -0.2);
        fac = std::min(fac, limit_growth ? 1.0 : 5.0);
        h *= std::max(fac, 0.2);
        limit_growth = false;
      } else {
        h *= std::max(0.9 * std::pow(errnorm, -0.2), 0.2);
        limit_growth = true;
      }
    }
    traj_.set_termination(Termination::TimeLimit);
  }

  double initial_step(const VectorXd& y, const VectorXd& ydot,
                      double t_end) const {
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (ydot[i] / sc) * (ydot[i] / sc);
    }
    d0 = std::sqrt(d0 / y.size());
    d1 = std::sqrt(d1 / y.size());
    double h = (d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6;
    return std::clamp(h, 1e-12, std::min(cfg_.max_step, 0.1 * t_end));
  }

  System sys_;
  const ForceFieldSpec& fs_;
  IntegratorConfig cfg_;
  Trajectory& traj_;
};

void add_samples(Trajectory& traj, double t_end, const IntegratorConfig& cfg) {
  std::vector<double> times;
  double reached = traj.t_reached();
  if (!cfg.output_times.empty()) {
    times = cfg.output_times;
  } else {
    int n = std::max(cfg.output_samples, 2);
    times.resize(n);
    double span = std::min(t_end, reached);
    for (int i = 0; i < n; ++i) times[i] = span * i / (n - 1);
  }
  const double slack =
      16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, reached);
  for (double t : times) {
    if (t < traj.t_begin() - slack || t > reached + slack) continue;
    double tc = std::clamp(t, traj.t_begin(), reached);
    auto st = traj.state_at(tc);
    if (cfg.renormalize) {
      double h = traj.screen().value(st.q);
      if (h > 0.0) {
        st.q /= h;
        st.pi = wedge(st.q, interior_coform(traj.screen().eval(st.q).dh, st.pi));
      }
    }
    traj.mutable_samples().push_back({tc, st.q, st.pi});
  }
}

/// Copy of the field with the integrator's (possibly tighter) cutoff.
ForceFieldSpec with_cutoff(const ForceFieldSpec& fs, const IntegratorConfig& cfg) {
  ForceFieldSpec f = fs;
  f.set_singularity_cutoff(std::max(fs.singularity_cutoff(), cfg.singularity_cutoff));
  return f;
}

Trajectory run_bivector(const ForceFieldSpec& fs, const ScreenSpec& s,
                        const Multivectord& q0, const Multivectord& pi0,
                        double t_end, const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  if (fs.dim() != s.dim())
    throw std::invalid_argument("field/screen dimension mismatch");
  ForceFieldSpec field = with_cutoff(fs, cfg);
  const int dim = s.dim();
  const int npi = blades::binomial(dim, 2);
  VectorXd y0(dim + npi);
  y0.head(dim) = q0.coeffs();
  y0.tail(npi) = pi0.coeffs();
  Trajectory traj(s, Trajectory::Formulation::Bivector, dim);
  BivectorSystem sys{&field, &s, dim, npi};
  if (cfg.renormalize) sys.renormalize(y0);
  Driver<BivectorSystem> driver(sys, field, cfg, traj);
  driver.run(y0, t_end);
  add_samples(traj, t_end, cfg);
  return traj;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
    throw std::invalid_argument("integrator tolerances must be positive");
  if (!(max_step > 0.0))
    throw std::invalid_argument("max_step must be positive");
  if (method == Method::RungeKutta4 && !(fixed_step > 0.0))
    throw std::invalid_argument("fixed_step must be positive");
  if (!(singularity_cutoff >= 0.0))
    throw std::invalid_argument("singularity_cutoff must be nonnegative");
  if (output_times.empty() && output_samples < 2)
    throw std::invalid_argument("output grid needs at least two samples");
  for (std::size_t i = 1; i < output_times.size(); ++i)
    if (output_times[i] <= output_times[i - 1])
      throw std::invalid_argument("output times must be strictly increasing");
}

Trajectory::State Trajectory::decode(const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& ydot) const {
  State st;
  const int npi = blades::binomial(dim_, 2);
  if (form_ == Formulation::Bivector) {
    st.q = Multivectord::vector(y.head(dim_).eval());
    st.pi = Multivectord(dim_, 2, y.tail(npi).eval());
    st.qdot = Multivectord::vector(ydot.head(dim_).eval());
    st.pidot = Multivectord(dim_, 2, ydot.tail(npi).eval());
  } else {
    st.q = Multivectord::vector(y.head(dim_).eval());
    st.qdot = Multivectord::vector(y.tail(dim_).eval());
    st.pi = wedge(st.q, st.qdot);
    Multivectord qddot = Multivectord::vector(ydot.tail(dim_).eval());
    st.pidot = wedge(st.q, qddot);  // qdot ^ qdot vanishes
  }
  return st;
}

Trajectory::State Trajectory::node_state(std::size_t k) const {
  return decode(nodes_[k].y, nodes_[k].ydot);
}

Eigen::VectorXd Trajectory::raw_state_at(double t) const {
  if (nodes_.empty()) throw Error("trajectory has no nodes");
  if (t <= nodes_.front().t) return nodes_.front().y;
  if (t >= nodes_.back().t) return nodes_.back().y;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                             [](double v, const Node& n) { return v < n.t; });
  return hermite(t, *(it - 1), *it);
}

Trajectory::State Trajectory::state_at(double t) const {
  if (nodes_.empty()) throw Error("trajectory has no nodes");
  if (t <= nodes_.front().t)
    return decode(nodes_.front().y, nodes_.front().ydot);
  if (t >= nodes_.back().t) return decode(nodes_.back().y, nodes_.back().ydot);
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                             [](double v, const Node& n) { return v < n.t; });
  return decode(hermite(t, *(it - 1), *it),
                hermite_derivative(t, *(it - 1), *it));
}

Trajectory integrate(const ForceFieldSpec& fs, const ScreenSpec& s,
                     const ProjectiveState& init, double t_end,
                     const IntegratorConfig& cfg) {
  validate_projective_state(init, 1e-8);
  Multivectord q0 = project_to_screen(s, init.ray);
  return run_bivector(fs, s, q0, init.pi, t_end, cfg);
}

Trajectory integrate(const ForceFieldSpec& fs, const ScreenSpec& s,
                     const ScreenState& init, double t_end,
                     const IntegratorConfig& cfg) {
  validate_screen_state(s, init, 1e-8);
  return run_bivector(fs, s, init.q, wedge(init.q, init.qdot), t_end, cfg);
}

Trajectory integrate_second_order(const ForceFieldSpec& fs, const ScreenSpec& s,
                                  const ScreenState& init, double t_end,
                                  const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  if (fs.dim() != s.dim())
    throw std::invalid_argument("field/screen dimension mismatch");
  validate_screen_state(s, init, 1e-8);
  ForceFieldSpec field = with_cutoff(fs, cfg);
  const int dim = s.dim();
  VectorXd y0(2 * dim);
  y0.head(dim) = init.q.coeffs();
  y0.tail(dim) = init.qdot.coeffs();
  Trajectory traj(s, Trajectory::Formulation::SecondOrder, dim);
  SecondOrderSystem sys{&field, &s, dim};
  if (cfg.renormalize) sys.renormalize(y0);
  Driver<SecondOrderSystem> driver(sys, field, cfg, traj);
  driver.run(y0, t_end);
  add_samples(traj, t_end, cfg);
  return traj;
}

// ---------------------------------------------------------------------------
// Transport between screens

namespace {

double screen_value_or_nonpositive(const ScreenSpec& s, const Multivectord& q) {
  if (s.kind() == ScreenKind::Flat) return pair(s.form(), q);
  return s.in_domain(q) ? s.value(q) : 0.0;
}

/// Integral of h1(q(t))^{-2} over [a, b] within one skeleton interval.
double tau_increment(const ScreenSpec& s1, const Trajectory::Node& na,
                     const Trajectory::Node& nb, double a, double b, int dim) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (int g = 0; g < 5; ++g) {
    double t = mid + half * kGaussX[g];
    VectorXd y = hermite(t, na, nb);
    Multivectord q = Multivectord::vector(y.head(dim).eval());
    double h1 = screen_value_or_nonpositive(s1, q);
    if (!(h1 > 0.0))
      throw DomainError("transport_to_screen: h1(q) <= 0 at t = " +
                        std::to_string(t));
    acc += kGaussW[g] / (h1 * h1);
  }
  return acc * half;
}

}  // namespace

Trajectory transport_to_screen(const Trajectory& traj, const ScreenSpec& s1) {
  if (s1.dim() != traj.dim())
    throw std::invalid_argument("transport_to_screen: dimension mismatch");
  const int dim = traj.dim();
  const int npi = blades::binomial(dim, 2);

  // every skeleton point must lie in the domain of h1; report the first
  // offending time
  for (const auto& node : traj.nodes()) {
    Multivectord q = Multivectord::vector(node.y.head(dim).eval());
    if (!(screen_value_or_nonpositive(s1, q) > 0.0))
      throw DomainError("transport_to_screen: h1(q) <= 0 at t = " +
                        std::to_string(node.t));
  }

  Trajectory out(s1, Trajectory::Formulation::Bivector, dim);

  std::vector<double> tau(traj.nodes().size(), 0.0);
  for (std::size_t k = 1; k < traj.nodes().size(); ++k) {
    const auto& na = traj.nodes()[k - 1];
    const auto& nb = traj.nodes()[k];
    tau[k] = tau[k - 1] + tau_increment(s1, na, nb, na.t, nb.t, dim);
  }

  for (std::size_t k = 0; k < traj.nodes().size(); ++k) {
    auto st = traj.node_state(k);
    ScreenEval ev1 = s1.eval(st.q);
    Multivectord q1 = st.q / ev1.h;
    // dq1/dtau = h1 qdot - <dh1, qdot> q;  dpi/dtau = h1^2 pidot
    Multivectord q1dot = st.qdot * ev1.h - st.q * pair(ev1.dh, st.qdot);
    Multivectord pi1dot = st.pidot * (ev1.h * ev1.h);
    VectorXd y(dim + npi), ydot(dim + npi);
    y.head(dim) = q1.coeffs();
    y.tail(npi) = st.pi.coeffs();
    ydot.head(dim) = q1dot.coeffs();
    ydot.tail(npi) = pi1dot.coeffs();
    out.mutable_nodes().push_back({tau[k], y, ydot});
  }

  auto tau_at = [&](double t) {
    const auto& nodes = traj.nodes();
    if (t <= nodes.front().t) return tau.front();
    if (t >= nodes.back().t) return tau.back();
    auto it = std::upper_bound(
        nodes.begin(), nodes.end(), t,
        [](double v, const Trajectory::Node& n) { return v < n.t; });
    std::size_t k = static_cast<std::size_t>(it - nodes.begin());
    return tau[k - 1] +
           tau_increment(s1, nodes[k - 1], nodes[k], nodes[k - 1].t, t, dim);
  };

  for (const auto& smp : traj.samples()) {
    Multivectord q1 = smp.q / s1.value(smp.q);
    out.mutable_samples().push_back({tau_at(smp.t), q1, smp.pi});
  }
  for (const auto& ev : traj.events()) {
    Event moved = ev;
    moved.t = tau_at(ev.t);
    if (ev.q.dim() == dim) moved.q = ev.q / s1.value(ev.q);
    out.mutable_events().push_back(std::move(moved));
  }
  out.set_termination(traj.terminated_by());
  return out;
}

// ---------------------------------------------------------------------------
// Oriented leaf crossings

std::vector<Crossing> detect_crossings(const Trajectory& traj,
                                       const Formd& leaf) {
  if (leaf.degree() != 1 || leaf.dim() != traj.dim())
    throw std::invalid_argument("detect_crossings: degree-1 leaf form expected");
  if (leaf.norm() == 0.0)
    throw std::invalid_argument("detect_crossings: zero leaf form");
  const int dim = traj.dim();
  std::vector<Crossing> out;

  auto value_at = [&](double t) {
    VectorXd y = traj.raw_state_at(t);
    return leaf.coeffs().dot(y.head(dim));
  };

  const auto& nodes = traj.nodes();
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    double va = leaf.coeffs().dot(nodes[k].y.head(dim));
    double vb = leaf.coeffs().dot(nodes[k + 1].y.head(dim));
    if (!(va < 0.0 && vb >= 0.0)) continue;
    double lo = nodes[k].t, hi = nodes[k + 1].t;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (value_at(mid) < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    double tc = hi;
    auto st = traj.state_at(tc);
    Multivectord q = project_to_screen(traj.screen(), st.q);
    Multivectord pi = wedge(q, interior_coform(traj.screen().eval(q).dh, st.pi));
    out.push_back({tc, ProjectiveState{q, pi}});
  }
  return out;
}

}  // namespace projdyn
