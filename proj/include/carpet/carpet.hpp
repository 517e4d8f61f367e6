#pragma once

// Everything in one include.

#include "carpet/boundary.hpp"
#include "carpet/cache.hpp"
#include "carpet/covers.hpp"
#include "carpet/eigensolver.hpp"
#include "carpet/error.hpp"
#include "carpet/fit.hpp"
#include "carpet/geometry.hpp"
#include "carpet/harmonic.hpp"
#include "carpet/io.hpp"
#include "carpet/kernels.hpp"
#include "carpet/linalg.hpp"
#include "carpet/operators.hpp"
#include "carpet/reproduce.hpp"
#include "carpet/spectra.hpp"
