#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace clipsgd {

using Vector = Eigen::VectorXd;

/// Every stochastic component draws from this engine. Streams are seeded
/// explicitly; nothing in the library touches a global generator.
using Rng = std::mt19937_64;

/// Geometry of the primal space. The clipping and Lipschitz bounds are
/// measured in the dual norm: l2 for L2, l-infinity for L1Simplex.
enum class NormTag { L2, L1Simplex };

double dual_norm(const Vector& v, NormTag tag);
std::string to_string(NormTag tag);

/// A precondition on an operation's arguments was violated.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A hypothesis of a bound-checking routine does not hold (e.g. M < 2G).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Stateful producers called out of order.
class SequenceError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Creates an independent generator stream for (master, stream) pairs.
Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id);

}  // namespace clipsgd
