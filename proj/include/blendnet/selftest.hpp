#pragma once

#include <cstddef>
#include <cstdint>

namespace blendnet {

// Oracle and gradient suites behind the `selftest` subcommand: kernel
// backend bit-equivalence, forward oracles against the naive references,
// finite-difference gradient checks, softmax/attention invariants, tape
// mechanics, and a checkpoint roundtrip. Returns the number of failed
// checks; prints one line per suite.
size_t run_selftest(uint64_t seed);

}  // namespace blendnet
