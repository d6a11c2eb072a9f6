#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "lattice.hpp"
#include "special_functions.hpp"
#include "ray_distributions.hpp"
#include "path_loss.hpp"
#include "monte_carlo.hpp"
#include "calibration.hpp"
