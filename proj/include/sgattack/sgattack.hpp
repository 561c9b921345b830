#pragma once

// Umbrella header.

#include "error.hpp"
#include "rng.hpp"
#include "jsonlib.hpp"
#include "graph.hpp"
#include "surrogate.hpp"
#include "metrics.hpp"
#include "numerics/linalg.hpp"
#include "numerics/tape.hpp"
#include "numerics/ops.hpp"
#include "numerics/grad_check.hpp"
#include "fextra.hpp"
#include "pole.hpp"
#include "balance.hpp"
#include "attacks.hpp"
#include "detectors.hpp"
#include "harness.hpp"
