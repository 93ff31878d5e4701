#pragma once

// Umbrella header for the library (the CLI layer lives in cli.hpp).

#include "meancurve/bandwidth.hpp"
#include "meancurve/csv.hpp"
#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/estimators.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/kernel.hpp"
#include "meancurve/population.hpp"
#include "meancurve/response.hpp"
#include "meancurve/rng.hpp"
#include "meancurve/simulation.hpp"
#include "meancurve/types.hpp"
#include "meancurve/variance.hpp"
