#pragma once

// Umbrella header for the junctionless-FET device simulator library.

#include "bernoulli.hpp"
#include "compact.hpp"
#include "config.hpp"
#include "constants.hpp"
#include "device.hpp"
#include "extraction.hpp"
#include "io.hpp"
#include "iv_curve.hpp"
#include "materials.hpp"
#include "mesh.hpp"
#include "solver.hpp"
#include "svg.hpp"
#include "sweep.hpp"
