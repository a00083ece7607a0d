#pragma once

// Umbrella header for the cohomogeneity-one quasi-Einstein solver library.

#include "coqe/errors.hpp"
#include "coqe/homspace.hpp"
#include "coqe/ode.hpp"
#include "coqe/dynamics.hpp"
#include "coqe/singularity.hpp"
#include "coqe/bvp.hpp"
#include "coqe/config.hpp"
#include "coqe/csv.hpp"
#include "coqe/cli.hpp"
