#pragma once

#include "ipcc/error.hpp"
#include "ipcc/fit.hpp"
#include "ipcc/gaussian.hpp"
#include "ipcc/metrics.hpp"
#include "ipcc/projection.hpp"
#include "ipcc/relevance.hpp"
#include "ipcc/rng.hpp"
#include "ipcc/scene.hpp"
#include "ipcc/scenes.hpp"
#include "ipcc/version.hpp"
