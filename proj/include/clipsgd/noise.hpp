#pragma once

#include <cstddef>
#include <string>

#include "clipsgd/types.hpp"

namespace clipsgd {

enum class NoiseFamily { SpherePareto, Gaussian, Zero };

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);

/// Scale s such that xi = s * Z * u has E||xi||^p = sigma^p when Z is
/// Pareto(shape, minimum 1) and u is a unit vector. Uses E[Z^p] = a/(a-p).
/// Throws DomainError when shape <= p (the p-th moment is infinite).
double pareto_scale_for_moment(double p, double sigma, double shape);

/// Description of a zero-mean perturbation law with E||xi||_*^p = sigma^p.
///
/// The direction of a SpherePareto or Gaussian draw is isotropic in l2. When
/// the moment bound is stated in the l-infinity dual norm (simplex geometry)
/// the radial scale is divided by (E||v||_inf^p)^(1/p), where v is the
/// unit-scale direction variable, estimated once at construction by a fixed
/// seed Monte Carlo pre-pass.
class NoiseModel {
 public:
  struct Params {
    NoiseFamily family = NoiseFamily::Zero;
    double p = 2.0;
    double sigma = 0.0;
    double shape = 0.0;  ///< Pareto tail index; 0 selects the default p + 0.25.
    std::size_t dimension = 1;
    NormTag norm = NormTag::L2;
  };

  explicit NoiseModel(const Params& params);

  static NoiseModel sphere_pareto(std::size_t d, double p, double sigma, double shape = 0.0,
                                  NormTag norm = NormTag::L2);
  static NoiseModel gaussian(std::size_t d, double sigma, NormTag norm = NormTag::L2);
  static NoiseModel zero(std::size_t d, double p = 2.0);

  NoiseFamily family() const { return params_.family; }
  double p() const { return params_.p; }
  double sigma() const { return params_.sigma; }
  double shape() const { return params_.shape; }
  std::size_t dimension() const { return params_.dimension; }
  NormTag norm() const { return params_.norm; }
  const Params& params() const { return params_; }

  /// SpherePareto: multiplier s of Z*u. Gaussian: per-coordinate standard
  /// deviation. Zero: 0.
  double scale() const { return scale_; }

  /// E||v||_inf^p of the unit-scale direction variable (1 for L2 models).
  double dual_norm_factor() const { return dual_factor_; }

 private:
  Params params_;
  double scale_ = 0.0;
  double dual_factor_ = 1.0;
};

/// Fills `out` (size d) with one perturbation. Consumes generator state only.
void draw(const NoiseModel& model, Rng& rng, Vector& out);
Vector draw(const NoiseModel& model, Rng& rng);

/// E[min(||xi||_2, cap)^p] in closed form (SpherePareto, Gaussian).
double truncated_pth_moment(const NoiseModel& model, double cap);

}  // namespace clipsgd
