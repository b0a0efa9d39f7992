#pragma once

#include "timeloop/covering.hpp"
#include "timeloop/errors.hpp"
#include "timeloop/geodesic.hpp"
#include "timeloop/hillclimb.hpp"
#include "timeloop/jacobi.hpp"
#include "timeloop/loop.hpp"
#include "timeloop/loopspace.hpp"
#include "timeloop/manifold.hpp"
#include "timeloop/random.hpp"
