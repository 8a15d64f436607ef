#pragma once

#include "freehand/calib.hpp"
#include "freehand/ddf.hpp"
#include "freehand/error.hpp"
#include "freehand/io.hpp"
#include "freehand/metrics.hpp"
#include "freehand/parallel.hpp"
#include "freehand/ranking.hpp"
#include "freehand/rng.hpp"
#include "freehand/se3.hpp"
#include "freehand/sim.hpp"
#include "freehand/statistics.hpp"
