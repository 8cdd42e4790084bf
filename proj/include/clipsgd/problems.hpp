#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include "clipsgd/types.hpp"

namespace clipsgd {

enum class Geometry { EuclideanProjection, MirrorMap };

/// A convex benchmark with an exact subgradient oracle and a known minimizer.
///
/// Instances are immutable once built and may be shared between threads.
/// Euclidean problems expose `project`; mirror-map problems expose
/// `mirror_step`, the Bregman proximal step
///   argmin_x <g, x - x_t> + D_psi(x, x_t) / eta.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string kind() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual void subgradient(const Vector& x, Vector& out) const = 0;
  virtual bool is_feasible(const Vector& x, double tol = 1e-9) const = 0;

  /// In-place Euclidean projection onto the feasible set.
  virtual void project(Vector& x) const;
  /// In-place Bregman proximal step.
  virtual void mirror_step(Vector& x, const Vector& g, double eta) const;
  /// D_psi(x, y); half the squared l2 distance for Euclidean problems.
  virtual double bregman(const Vector& x, const Vector& y) const;

  Vector subgradient(const Vector& x) const;

  std::size_t dimension() const { return static_cast<std::size_t>(x_star_.size()); }
  Geometry geometry() const { return geometry_; }
  NormTag norm_tag() const { return norm_; }
  const Vector& x_star() const { return x_star_; }
  double f_star() const { return f_star_; }
  double lipschitz() const { return lipschitz_; }
  double mu() const { return mu_; }
  /// Radius of the feasible ball centred at the origin, if bounded.
  std::optional<double> radius() const { return radius_; }

 protected:
  Problem(Vector x_star, double lipschitz, double mu, Geometry geometry, NormTag norm,
          std::optional<double> radius);
  void set_f_star(double f) { f_star_ = f; }

 private:
  Vector x_star_;
  double f_star_ = 0.0;
  double lipschitz_;
  double mu_;
  Geometry geometry_;
  NormTag norm_;
  std::optional<double> radius_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// F(x) = G ||x - x_star||_2 on R^d, or on the origin-centred l2 ball of
/// `radius`. The subgradient at the apex is the zero vector.
ProblemPtr make_distance_cone(double G, const Vector& x_star,
                              std::optional<double> radius = std::nullopt);

/// F(x) = (mu/2) ||x - x_star||^2 on the origin-centred l2 ball of `radius`,
/// with G = mu (radius + ||x_star||).
ProblemPtr make_strongly_convex_ball(double mu, const Vector& x_star, double radius);

/// F(x) = <c, x> on the probability simplex with negative-entropy mirror map.
/// G = max |c_i| (l-infinity); x_star is the vertex of the lowest-index
/// minimal cost.
ProblemPtr make_simplex_linear(const Vector& cost);

Vector project_ball(const Vector& x, const Vector& center, double radius);

/// Euclidean projection onto {x >= 0, sum x = 1} by the sort-and-threshold
/// rule.
Vector project_simplex(const Vector& x);

/// Closed-form exponentiated-gradient step x+ proportional to x * exp(-eta g).
Vector entropy_mirror_step(const Vector& x, const Vector& g, double eta);

/// KL(x || y) on the simplex, the Bregman divergence of negative entropy.
double kl_divergence(const Vector& x, const Vector& y);

}  // namespace clipsgd
