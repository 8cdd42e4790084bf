#include "clipsgd/types.hpp"

namespace clipsgd {

double dual_norm(const Vector& v, NormTag tag) {
  if (v.size() == 0) return 0.0;
  return tag == NormTag::L2 ? v.norm() : v.cwiseAbs().maxCoeff();
}

std::string to_string(NormTag tag) { return tag == NormTag::L2 ? "l2" : "l1_simplex"; }

Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                    0x636c6970u};
  return Rng(seq);
}

}  // namespace clipsgd
