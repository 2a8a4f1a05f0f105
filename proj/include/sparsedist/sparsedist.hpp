// SPDX-License-Identifier: Apache-2.0
// Umbrella header.
#pragma once

#include "sparsedist/error.hpp"
#include "sparsedist/special.hpp"
#include "sparsedist/quadrature.hpp"
#include "sparsedist/roots.hpp"
#include "sparsedist/linalg.hpp"
#include "sparsedist/tsallis.hpp"
#include "sparsedist/densities.hpp"
#include "sparsedist/density_json.hpp"
#include "sparsedist/sampling.hpp"
#include "sparsedist/losses.hpp"
#include "sparsedist/attention.hpp"
#include "sparsedist/fusedmax.hpp"
