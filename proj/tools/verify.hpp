#pragma once

#include <cstdint>
#include <string>

namespace gbmd::cli {

// Runs the analytic-oracle property suite on synthetic data and prints one
// pass/fail line per property. Returns 0 iff every property passes.
// fault selects an intentional defect as a negative control ("" = none;
// "drift-sign" flips the forward drift before the moment checks).
int run_verify(std::uint64_t seed, const std::string& fault);

} // namespace gbmd::cli
