#pragma once

// Umbrella header: MAP partitions of conjugate exponential-family Bayesian
// mixture models, with constructive separability certificates for the
// resulting clusters.

#include "mapsep/common.hpp"
#include "mapsep/exp_family.hpp"
#include "mapsep/io.hpp"
#include "mapsep/map_search.hpp"
#include "mapsep/models_normal.hpp"
#include "mapsep/oracle.hpp"
#include "mapsep/partition.hpp"
#include "mapsep/partition_prior.hpp"
#include "mapsep/separability.hpp"
#include "mapsep/simplex.hpp"
