#pragma once

// Convenience header pulling in the whole library.

#include "permapprox/activation.hpp"
#include "permapprox/attention.hpp"
#include "permapprox/bench.hpp"
#include "permapprox/common.hpp"
#include "permapprox/dropout.hpp"
#include "permapprox/io.hpp"
#include "permapprox/model.hpp"
#include "permapprox/oracle.hpp"
#include "permapprox/parallel.hpp"
#include "permapprox/real_valued.hpp"
#include "permapprox/rng.hpp"
#include "permapprox/rollout.hpp"
#include "permapprox/solver.hpp"
#include "permapprox/sweep.hpp"
#include "permapprox/tsp.hpp"
