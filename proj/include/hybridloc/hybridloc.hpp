#pragma once

#include "core.hpp"
#include "rng.hpp"
#include "geometry.hpp"
#include "builder.hpp"
#include "estimator.hpp"
#include "simulator.hpp"
#include "io.hpp"
#include "harness.hpp"
