#ifndef RAV_CHECKS_HPP
#define RAV_CHECKS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace rav {

// Fault-injection hooks for verifying that the battery actually catches
// broken assemblies. Applied inside the check harness only, never in
// library code.
enum class Mutation { none, clf_sign_flip, lambda2_grad_error };

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// The full property battery: spectral sanity, gradient agreement against
// central differences, QP solver vs oracle, merit monotonicity, the
// mismatch decomposition identities, and continuity across the
// communication cutoff.
std::vector<CheckResult> run_property_checks(std::uint64_t seed,
                                             Mutation mutation = Mutation::none);

// Individual batteries, parameterized so the acceptance suite can run them
// at its own sample counts.
namespace checks_detail {
CheckResult check_sym_eig(std::uint64_t seed, std::size_t count);
CheckResult check_lambda2_gradient(std::uint64_t seed, std::size_t count, Mutation mutation);
CheckResult check_adjacency_gradient(std::uint64_t seed, std::size_t count);
CheckResult check_hv_gradient(std::uint64_t seed, std::size_t count);
CheckResult check_qp_battery(std::uint64_t seed, std::size_t count);
CheckResult check_w_monotonicity(std::uint64_t seed, std::size_t runs, double dt_fast,
                                 std::size_t budget);
CheckResult check_decomposition(std::uint64_t seed, std::size_t count, Mutation mutation);
CheckResult check_block_scalar_agreement(std::uint64_t seed, std::size_t count);
CheckResult check_continuity_at_dc(std::uint64_t seed, std::size_t count);
}  // namespace checks_detail

}  // namespace rav

#endif
