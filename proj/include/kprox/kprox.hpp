#pragma once

// Kullback-proximal point framework: maximum-likelihood estimation through
// proximal iterations penalized by a Kullback distance-like function, with
// the EM algorithm recovered at relaxation 1.

#include "kprox/common.hpp"
#include "kprox/config.hpp"
#include "kprox/diagnostics.hpp"
#include "kprox/divergence.hpp"
#include "kprox/engine.hpp"
#include "kprox/io.hpp"
#include "kprox/models/competing_risks.hpp"
#include "kprox/models/gaussian_mixture.hpp"
#include "kprox/phi.hpp"
#include "kprox/rng.hpp"
#include "kprox/runner.hpp"
#include "kprox/solvers.hpp"
