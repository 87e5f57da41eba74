#pragma once

// Gradients of the predicted loss over (d, n, w, h), projection onto the
// tangent space of the parameter-count level set, gradient fields for
// plotting, and descent that stays on the level set.
//
// Hyperparameters are relaxed to positive reals. Sequence length and
// vocabulary are held fixed because PARAMS does not depend on s and the
// vocabulary is a property of the tokenizer.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <tuple>
#include <string>
#include <string_view>
#include <vector>

#include "hyperloss/accounting.hpp"
#include "hyperloss/scaling.hpp"
#include "hyperloss/throughput.hpp"

namespace hyperloss {

struct HyperVector {
  double d = 0, n = 0, w = 0, h = 0;

  HyperVector& operator+=(const HyperVector& o) {
    d += o.d;
    n += o.n;
    w += o.w;
    h += o.h;
    return *this;
  }
  friend HyperVector operator+(HyperVector a, const HyperVector& b) { return a += b; }
  friend HyperVector operator-(const HyperVector& a) { return {-a.d, -a.n, -a.w, -a.h}; }
  friend HyperVector operator-(const HyperVector& a, const HyperVector& b) { return a + (-b); }
  friend HyperVector operator*(double k, const HyperVector& a) { return {k * a.d, k * a.n, k * a.w, k * a.h}; }
  friend bool operator==(const HyperVector&, const HyperVector&) = default;

  bool positive() const { return d > 0 && n > 0 && w > 0 && h > 0; }
};

inline double dot(const HyperVector& a, const HyperVector& b) { return a.d * b.d + a.n * b.n + a.w * b.w + a.h * b.h; }
inline double norm(const HyperVector& a) { return std::sqrt(dot(a, a)); }

enum class Axis { d, n, w, h };

inline double get(const HyperVector& x, Axis a) {
  switch (a) {
    case Axis::d:
      return x.d;
    case Axis::n:
      return x.n;
    case Axis::w:
      return x.w;
    case Axis::h:
      return x.h;
  }
  return 0;
}

inline void set(HyperVector& x, Axis a, double value) {
  switch (a) {
    case Axis::d:
      x.d = value;
      break;
    case Axis::n:
      x.n = value;
      break;
    case Axis::w:
      x.w = value;
      break;
    case Axis::h:
      x.h = value;
      break;
  }
}

inline std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::d:
      return "d";
    case Axis::n:
      return "n";
    case Axis::w:
      return "w";
    case Axis::h:
      return "h";
  }
  return "?";
}

inline Axis parse_axis(std::string_view s) {
  if (s == "d") return Axis::d;
  if (s == "n") return Axis::n;
  if (s == "w") return Axis::w;
  if (s == "h") return Axis::h;
  throw ValidationError("unknown axis: " + std::string(s) + " (expected d, n, w or h)");
}

// Everything the predicted loss depends on besides (d, n, w, h).
struct Objective {
  TimeCoefficients time;
  ScalingLaw law;
  TrainBudget budget;
  double s = 512;
  double v = 8000;

  ContinuousShape shape_at(const HyperVector& x) const { return {x.d, x.n, s, v, x.w, x.h}; }

  // Divisor turning step time into the data term: D = K / TIME.
  double data_scale() const {
    if (budget.token_mode == TokenMode::steps) return budget.T;
    return budget.T * static_cast<double>(budget.batch) * s;
  }
};

inline HyperVector to_hyper(const TransformerShape& x) {
  return {static_cast<double>(x.d), static_cast<double>(x.n), static_cast<double>(x.w), static_cast<double>(x.h)};
}

namespace detail {

inline void check_point(const HyperVector& x, const Objective& obj) {
  if (!x.positive() || !std::isfinite(norm(x))) throw DomainError("hyperparameters must be finite and positive");
  if (!(obj.s >= 1) || !(obj.v >= 1)) throw DomainError("fixed s and v must be >= 1");
  validate(obj.budget);
}

inline HyperVector free_part(const CostGradient& g) { return {g.dd, g.dn, g.dw, g.dh}; }

}  // namespace detail

inline double params_at(const HyperVector& x, const Objective& obj) {
  return evaluate(obj.shape_at(x), CostKind::params);
}

inline HyperVector params_gradient(const HyperVector& x, const Objective& obj) {
  return detail::free_part(accounting_gradients(obj.shape_at(x), CostKind::params));
}

// The continuous counterpart of predict_loss_from_shape.
inline double predicted_loss(const HyperVector& x, const Objective& obj) {
  detail::check_point(x, obj);
  const double params = params_at(x, obj);
  const auto& law = obj.law;
  const double time = predict_step_time(obj.shape_at(x), obj.time);
  return law.E + law.A / std::pow(params, law.alpha) + law.B * std::pow(time / obj.data_scale(), law.beta);
}

// dL/d(d, n, w, h) by the chain rule through PARAMS and TIME.
inline HyperVector loss_gradient(const HyperVector& x, const Objective& obj) {
  detail::check_point(x, obj);
  const auto shape = obj.shape_at(x);
  const auto& law = obj.law;
  const double params = evaluate(shape, CostKind::params);
  const double time = predict_step_time(shape, obj.time);
  const double k = obj.data_scale();

  const HyperVector dparams = detail::free_part(accounting_gradients(shape, CostKind::params));
  const HyperVector dtime = obj.time.c1 * detail::free_part(accounting_gradients(shape, CostKind::memcpys)) +
                            obj.time.c2 * detail::free_part(accounting_gradients(shape, CostKind::flops));

  const double params_coef = -law.A * law.alpha * std::pow(params, -law.alpha - 1.0);
  const double time_coef = law.B * law.beta * std::pow(time / k, law.beta - 1.0) / k;
  return params_coef * dparams + time_coef * dtime;
}

// g with its component along the normal p removed.
inline HyperVector reject(const HyperVector& g, const HyperVector& p) {
  const double pp = dot(p, p);
  if (!(pp > 0) || !std::isfinite(pp)) throw DegenerateConstraint("constraint normal vanishes; level set is degenerate");
  return g - (dot(g, p) / pp) * p;
}

// g with its component along grad PARAMS(x) removed.
inline HyperVector tangent_component(const HyperVector& g, const HyperVector& x, const Objective& obj) {
  return reject(g, params_gradient(x, obj));
}

// Steepest-descent direction at constant parameter count: -g projected onto
// the level set's tangent space.
inline HyperVector project_onto_constant_params(const HyperVector& g, const HyperVector& x, const Objective& obj) {
  return -tangent_component(g, x, obj);
}

struct GridAxis {
  Axis axis = Axis::d;
  double lo = 1;
  double hi = 1;
  std::size_t count = 1;
  bool log_spaced = false;

  double at(std::size_t i) const {
    if (count <= 1) return lo;
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    if (log_spaced) return std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    return lo + t * (hi - lo);
  }
};

struct FieldSample {
  double coord1 = 0, coord2 = 0;
  double arrow1 = 0, arrow2 = 0;
  double loss = 0;
  double params = 0;
  HyperVector direction;  // full projected vector
  std::optional<std::string> error;
};

// Projected negative gradient at every point of a 2-D grid over two axes;
// the other two free hyperparameters come from `base`. Row-major: the first
// axis is the outer loop. Points where the loss is undefined are returned
// with `error` set.
inline std::vector<FieldSample> gradient_field(const GridAxis& first, const GridAxis& second, const HyperVector& base,
                                               const Objective& obj) {
  if (first.axis == second.axis) throw ValidationError("gradient field axes must differ");
  if (first.count == 0 || second.count == 0) throw ValidationError("grid counts must be >= 1");
  std::vector<FieldSample> out;
  out.reserve(first.count * second.count);
  for (std::size_t i = 0; i < first.count; ++i) {
    for (std::size_t j = 0; j < second.count; ++j) {
      HyperVector x = base;
      set(x, first.axis, first.at(i));
      set(x, second.axis, second.at(j));
      FieldSample sample;
      sample.coord1 = first.at(i);
      sample.coord2 = second.at(j);
      try {
        sample.loss = predicted_loss(x, obj);
        sample.params = params_at(x, obj);
        sample.direction = project_onto_constant_params(loss_gradient(x, obj), x, obj);
        sample.arrow1 = get(sample.direction, first.axis);
        sample.arrow2 = get(sample.direction, second.axis);
      } catch (const Error& e) {
        sample.error = e.what();
      }
      out.push_back(std::move(sample));
    }
  }
  return out;
}

struct TrajectoryPoint {
  HyperVector x;
  double loss = 0;
  double params = 0;
};

struct DescentOptions {
  int max_halvings = 20;
  int max_corrections = 5;
  double correction_tolerance = 1e-8;  // relative PARAMS drift targeted per correction
  double drift_limit = 1e-6;           // relative PARAMS drift accepted on a recorded point
};

namespace detail {

// Newton steps along grad PARAMS back onto the level set PARAMS = target.
inline HyperVector correct_to_level_set(HyperVector x, double target, const Objective& obj,
                                        const DescentOptions& opt) {
  for (int k = 0; k < opt.max_corrections; ++k) {
    const double drift = target - params_at(x, obj);
    if (std::abs(drift) / target < opt.correction_tolerance) break;
    const HyperVector p = params_gradient(x, obj);
    x += (drift / dot(p, p)) * p;
  }
  return x;
}

}  // namespace detail

// Projected gradient descent at constant parameter count. The trajectory
// starts with x0 and has at most iters + 1 points; it ends early when no
// step size down to step / 2^max_halvings keeps the point positive, on the
// level set, and the loss from increasing.
inline std::vector<TrajectoryPoint> constrained_descent(const HyperVector& x0, double step, std::size_t iters,
                                                        const Objective& obj, const DescentOptions& opt = {}) {
  if (!(step >= 0) || !std::isfinite(step)) throw DomainError("descent step must be nonnegative");
  const double loss0 = predicted_loss(x0, obj);
  const double target = params_at(x0, obj);
  std::vector<TrajectoryPoint> out{{x0, loss0, target}};

  for (std::size_t it = 0; it < iters; ++it) {
    const TrajectoryPoint& cur = out.back();
    const HyperVector dir = project_onto_constant_params(loss_gradient(cur.x, obj), cur.x, obj);
    std::optional<TrajectoryPoint> next;
    double t = step;
    for (int halving = 0; halving <= opt.max_halvings && !next; ++halving, t *= 0.5) {
      HyperVector cand = cur.x + t * dir;
      if (!cand.positive()) continue;
      cand = detail::correct_to_level_set(cand, target, obj, opt);
      if (!cand.positive()) continue;
      const double params = params_at(cand, obj);
      if (std::abs(params - target) / target >= opt.drift_limit) continue;
      double loss;
      try {
        loss = predicted_loss(cand, obj);
      } catch (const Error&) {
        continue;
      }
      if (loss <= cur.loss) next = TrajectoryPoint{cand, loss, params};
    }
    if (!next) break;
    out.push_back(*next);
  }
  return out;
}

struct RoundingReport {
  TransformerShape shape;
  double loss = 0;
  double params = 0;
  double param_deviation = 0;  // |PARAMS(shape) - PARAMS(x)|
};

// Snaps a relaxed point to the best integer shape among the 3^4 lattice
// neighbours (rounded value -1, 0, +1 per axis) with h dividing d. Ties go
// to the smaller parameter deviation, then lexicographic (d, n, w, h).
inline RoundingReport round_to_shape(const HyperVector& x, const Objective& obj) {
  detail::check_point(x, obj);
  const double reference = params_at(x, obj);
  const std::array<double, 4> centre{std::round(x.d), std::round(x.n), std::round(x.w), std::round(x.h)};
  std::optional<RoundingReport> best;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c)
        for (int e = -1; e <= 1; ++e) {
          const double vals[4] = {centre[0] + a, centre[1] + b, centre[2] + c, centre[3] + e};
          if (vals[0] < 1 || vals[1] < 1 || vals[2] < 1 || vals[3] < 1) continue;
          TransformerShape shape{static_cast<std::uint64_t>(vals[0]), static_cast<std::uint64_t>(vals[1]),
                                 static_cast<std::uint64_t>(obj.s), static_cast<std::uint64_t>(obj.v),
                                 static_cast<std::uint64_t>(vals[2]), static_cast<std::uint64_t>(vals[3])};
          if (!is_valid(shape)) continue;
          RoundingReport r;
          r.shape = shape;
          try {
            r.loss = predict_loss_from_shape(shape, obj.time, obj.law, obj.budget);
          } catch (const Error&) {
            continue;
          }
          r.params = static_cast<double>(count_params(shape));
          r.param_deviation = std::abs(r.params - reference);
          auto key = [](const RoundingReport& q) {
            return std::tuple(q.loss, q.param_deviation, q.shape.d, q.shape.n, q.shape.w, q.shape.h);
          };
          if (!best || key(r) < key(*best)) best = r;
        }
  if (!best) throw DomainError("no integer shape with h dividing d near the relaxed point");
  return *best;
}

}  // namespace hyperloss
