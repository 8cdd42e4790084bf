#include "clipsgd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace clipsgd {

Problem::Problem(Vector x_star, double lipschitz, double mu, Geometry geometry, NormTag norm,
                 std::optional<double> radius)
    : x_star_(std::move(x_star)),
      lipschitz_(lipschitz),
      mu_(mu),
      geometry_(geometry),
      norm_(norm),
      radius_(radius) {}

void Problem::project(Vector&) const {
  throw DomainError(kind() + " has no Euclidean projection (mirror-map geometry)");
}

void Problem::mirror_step(Vector&, const Vector&, double) const {
  throw DomainError(kind() + " has no mirror map (Euclidean geometry)");
}

double Problem::bregman(const Vector& x, const Vector& y) const {
  return 0.5 * (x - y).squaredNorm();
}

Vector Problem::subgradient(const Vector& x) const {
  Vector g(x.size());
  subgradient(x, g);
  return g;
}

Vector project_ball(const Vector& x, const Vector& center, double radius) {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  const double dist = (x - center).norm();
  if (dist <= radius) return x;
  return center + (radius / dist) * (x - center);
}

Vector project_simplex(const Vector& x) {
  const Eigen::Index d = x.size();
  if (d == 0) throw DomainError("cannot project an empty vector onto the simplex");
  if ((x.array() >= 0.0).all() && std::abs(x.sum() - 1.0) <= 1e-15) return x;

  std::vector<double> sorted(x.data(), x.data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) threshold = candidate;
  }
  return (x.array() - threshold).max(0.0).matrix();
}

Vector entropy_mirror_step(const Vector& x, const Vector& g, double eta) {
  // Shift exponents by their maximum so the largest factor is exactly 1.
  const Eigen::ArrayXd exponent = -eta * g.array();
  const double shift = exponent.maxCoeff();
  Vector next = (x.array() * (exponent - shift).exp()).matrix();
  const double total = next.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DomainError("mirror step produced a degenerate point");
  }
  return next / total;
}

double kl_divergence(const Vector& x, const Vector& y) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) sum += x[i] * std::log(x[i] / y[i]);
  }
  return sum;
}

namespace {

class DistanceCone final : public Problem {
 public:
  DistanceCone(double G, Vector x_star, std::optional<double> radius)
      : Problem(std::move(x_star), G, 0.0, Geometry::EuclideanProjection, NormTag::L2, radius) {}

  std::string kind() const override { return "distance_cone"; }

  double value(const Vector& x) const override { return lipschitz() * (x - x_star()).norm(); }

  void subgradient(const Vector& x, Vector& out) const override {
    out = x - x_star();
    const double dist = out.norm();
    if (dist > 0.0) {
      out *= lipschitz() / dist;
    } else {
      out.setZero();
    }
  }

  bool is_feasible(const Vector& x, double tol) const override {
    if (x.size() != x_star().size() || !x.allFinite()) return false;
    return !radius() || x.norm() <= *radius() * (1.0 + tol);
  }

  void project(Vector& x) const override {
    if (!radius()) return;
    const double n = x.norm();
    if (n > *radius()) x *= *radius() / n;
  }
};

class StronglyConvexBall final : public Problem {
 public:
  StronglyConvexBall(double mu, Vector x_star, double radius)
      : Problem(x_star, mu * (radius + x_star.norm()), mu, Geometry::EuclideanProjection,
                NormTag::L2, radius) {}

  std::string kind() const override { return "strongly_convex_ball"; }

  double value(const Vector& x) const override {
    return 0.5 * mu() * (x - x_star()).squaredNorm();
  }

  void subgradient(const Vector& x, Vector& out) const override { out = mu() * (x - x_star()); }

  bool is_feasible(const Vector& x, double tol) const override {
    if (x.size() != x_star().size() || !x.allFinite()) return false;
    return x.norm() <= *radius() * (1.0 + tol);
  }

  void project(Vector& x) const override {
    const double n = x.norm();
    if (n > *radius()) x *= *radius() / n;
  }
};

Vector simplex_vertex_of_min(const Vector& cost) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < cost.size(); ++i) {
    if (cost[i] < cost[best]) best = i;
  }
  return Vector::Unit(cost.size(), best);
}

class SimplexLinear final : public Problem {
 public:
  explicit SimplexLinear(Vector cost)
      : Problem(simplex_vertex_of_min(cost), cost.cwiseAbs().maxCoeff(), 0.0,
                Geometry::MirrorMap, NormTag::L1Simplex, std::nullopt),
        cost_(std::move(cost)) {
    set_f_star(cost_.minCoeff());
  }

  std::string kind() const override { return "simplex_linear"; }
  double value(const Vector& x) const override { return cost_.dot(x); }
  void subgradient(const Vector&, Vector& out) const override { out = cost_; }

  bool is_feasible(const Vector& x, double tol) const override {
    if (x.size() != cost_.size() || !x.allFinite()) return false;
    return (x.array() >= -tol).all() && std::abs(x.sum() - 1.0) <= tol;
  }

  void mirror_step(Vector& x, const Vector& g, double eta) const override {
    x = entropy_mirror_step(x, g, eta);
  }

  double bregman(const Vector& x, const Vector& y) const override { return kl_divergence(x, y); }

 private:
  Vector cost_;
};

}  // namespace

ProblemPtr make_distance_cone(double G, const Vector& x_star, std::optional<double> radius) {
  if (!(G > 0.0)) throw DomainError("cone slope G must be positive");
  if (x_star.size() < 1) throw DomainError("dimension must be at least 1");
  if (radius) {
    if (!(*radius > 0.0)) throw DomainError("ball radius must be positive");
    if (x_star.norm() > *radius) throw DomainError("minimizer lies outside the feasible ball");
  }
  return std::make_shared<DistanceCone>(G, x_star, radius);
}

ProblemPtr make_strongly_convex_ball(double mu, const Vector& x_star, double radius) {
  if (!(mu > 0.0)) throw DomainError("strong convexity modulus mu must be positive");
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  if (x_star.size() < 1) throw DomainError("dimension must be at least 1");
  if (x_star.norm() > radius) throw DomainError("minimizer lies outside the feasible ball");
  return std::make_shared<StronglyConvexBall>(mu, x_star, radius);
}

ProblemPtr make_simplex_linear(const Vector& cost) {
  if (cost.size() < 2) throw DomainError("simplex problems need dimension at least 2");
  if (!cost.allFinite()) throw DomainError("cost vector must be finite");
  return std::make_shared<SimplexLinear>(cost);
}

}  // namespace clipsgd
