#include "clipsgd/noise.hpp"

#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

namespace clipsgd {

namespace {

constexpr std::size_t kDualFactorSamples = 200000;
constexpr std::uint64_t kDualFactorSeed = 0x9e3779b97f4a7c15ULL;

void fill_normal(Rng& rng, Vector& out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
}

void fill_unit_sphere(Rng& rng, Vector& out) {
  double norm = 0.0;
  do {
    fill_normal(rng, out);
    norm = out.norm();
  } while (norm == 0.0);
  out /= norm;
}

// Z ~ Pareto(shape, min 1) by inversion; 1 - U lies in (0, 1].
double draw_pareto(Rng& rng, double shape) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return std::pow(1.0 - uniform(rng), -1.0 / shape);
}

double linf_factor(NoiseFamily family, std::size_t d, double p) {
  Rng rng(kDualFactorSeed);
  Vector v(static_cast<Eigen::Index>(d));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  long double acc = 0.0L;
  for (std::size_t n = 0; n < kDualFactorSamples; ++n) {
    if (family == NoiseFamily::Gaussian) {
      fill_normal(rng, v);
      v *= inv_sqrt_d;
    } else {
      fill_unit_sphere(rng, v);
    }
    acc += std::pow(v.cwiseAbs().maxCoeff(), p);
  }
  return static_cast<double>(acc / static_cast<long double>(kDualFactorSamples));
}

}  // namespace

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::SpherePareto: return "sphere_pareto";
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::Zero: return "zero";
  }
  return "unknown";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "sphere_pareto") return NoiseFamily::SpherePareto;
  if (name == "gaussian") return NoiseFamily::Gaussian;
  if (name == "zero") return NoiseFamily::Zero;
  throw DomainError("unknown noise family '" + name + "'");
}

double pareto_scale_for_moment(double p, double sigma, double shape) {
  if (!(shape > p)) {
    throw DomainError("pareto shape must exceed p for a finite p-th moment");
  }
  if (!(sigma >= 0.0)) throw DomainError("noise level sigma must be nonnegative");
  return sigma * std::pow(shape / (shape - p), -1.0 / p);
}

NoiseModel::NoiseModel(const Params& params) : params_(params) {
  if (params_.dimension < 1) throw DomainError("noise dimension must be at least 1");
  if (!(params_.p > 1.0 && params_.p <= 2.0)) throw DomainError("moment order p must lie in (1, 2]");
  if (!(params_.sigma >= 0.0) || !std::isfinite(params_.sigma)) {
    throw DomainError("noise level sigma must be finite and nonnegative");
  }

  switch (params_.family) {
    case NoiseFamily::Zero:
      params_.sigma = 0.0;
      scale_ = 0.0;
      return;
    case NoiseFamily::Gaussian: {
      if (params_.p != 2.0) throw DomainError("gaussian noise requires p = 2");
      double level = params_.sigma;
      if (params_.norm == NormTag::L1Simplex) {
        dual_factor_ = linf_factor(NoiseFamily::Gaussian, params_.dimension, 2.0);
        level /= std::sqrt(dual_factor_);
      }
      scale_ = level / std::sqrt(static_cast<double>(params_.dimension));
      return;
    }
    case NoiseFamily::SpherePareto: {
      if (params_.shape == 0.0) params_.shape = params_.p + 0.25;
      scale_ = pareto_scale_for_moment(params_.p, params_.sigma, params_.shape);
      if (params_.norm == NormTag::L1Simplex) {
        dual_factor_ = linf_factor(NoiseFamily::SpherePareto, params_.dimension, params_.p);
        scale_ /= std::pow(dual_factor_, 1.0 / params_.p);
      }
      return;
    }
  }
}

NoiseModel NoiseModel::sphere_pareto(std::size_t d, double p, double sigma, double shape,
                                     NormTag norm) {
  return NoiseModel(Params{NoiseFamily::SpherePareto, p, sigma, shape, d, norm});
}

NoiseModel NoiseModel::gaussian(std::size_t d, double sigma, NormTag norm) {
  return NoiseModel(Params{NoiseFamily::Gaussian, 2.0, sigma, 0.0, d, norm});
}

NoiseModel NoiseModel::zero(std::size_t d, double p) {
  return NoiseModel(Params{NoiseFamily::Zero, p, 0.0, 0.0, d, NormTag::L2});
}

void draw(const NoiseModel& model, Rng& rng, Vector& out) {
  out.resize(static_cast<Eigen::Index>(model.dimension()));
  switch (model.family()) {
    case NoiseFamily::Zero:
      out.setZero();
      return;
    case NoiseFamily::Gaussian:
      fill_normal(rng, out);
      out *= model.scale();
      return;
    case NoiseFamily::SpherePareto: {
      fill_unit_sphere(rng, out);
      out *= model.scale() * draw_pareto(rng, model.shape());
      return;
    }
  }
}

Vector draw(const NoiseModel& model, Rng& rng) {
  Vector out;
  draw(model, rng, out);
  return out;
}

double truncated_pth_moment(const NoiseModel& model, double cap) {
  if (!(cap > 0.0)) throw DomainError("truncation cap must be positive");
  const double p = model.p();
  switch (model.family()) {
    case NoiseFamily::Zero:
      throw DomainError("truncated moment is defined for sphere_pareto and gaussian noise only");
    case NoiseFamily::SpherePareto: {
      const double s = model.scale();
      const double a = model.shape();
      if (s == 0.0) return 0.0;
      if (cap <= s) return std::pow(cap, p);
      const double ratio = cap / s;
      return std::pow(s, p) * (a / (a - p)) * (1.0 - std::pow(ratio, p - a)) +
             std::pow(cap, p) * std::pow(ratio, -a);
    }
    case NoiseFamily::Gaussian: {
      // ||xi|| = c * chi_d with c the per-coordinate deviation.
      const double c = model.scale();
      if (c == 0.0) return 0.0;
      const double half_d = 0.5 * static_cast<double>(model.dimension());
      const double x = 0.5 * (cap / c) * (cap / c);
      const double below = std::pow(c, p) * std::pow(2.0, 0.5 * p) *
                           boost::math::tgamma_ratio(half_d + 0.5 * p, half_d) *
                           boost::math::gamma_p(half_d + 0.5 * p, x);
      const double above = std::pow(cap, p) * boost::math::gamma_q(half_d, x);
      return below + above;
    }
  }
  return 0.0;
}

}  // namespace clipsgd
