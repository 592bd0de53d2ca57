#pragma once

#include "phimin/cli.hpp"
#include "phimin/config.hpp"
#include "phimin/error.hpp"
#include "phimin/estimates.hpp"
#include "phimin/geometry.hpp"
#include "phimin/identities.hpp"
#include "phimin/ilmanen.hpp"
#include "phimin/io.hpp"
#include "phimin/potential.hpp"
#include "phimin/solvers.hpp"
#include "phimin/stability.hpp"
#include "phimin/surface.hpp"
