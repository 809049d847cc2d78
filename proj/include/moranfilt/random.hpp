#pragma once

#include "moranfilt/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace moranfilt {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams with different ids never
/// share state, so adding a consumer does not perturb the others.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// m distinct indices drawn uniformly from [0, n), returned in ascending order.
std::vector<Index> uniform_subsample(Index n, Index m, std::uint64_t seed);

/// Vector of i.i.d. standard normal draws.
VectorXd standard_normal(Index n, Rng& rng);

}  // namespace moranfilt
