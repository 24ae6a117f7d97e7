#pragma once

#include "surfchange/calibration.hpp"
#include "surfchange/counter_rng.hpp"
#include "surfchange/decision.hpp"
#include "surfchange/error.hpp"
#include "surfchange/height_matrix.hpp"
#include "surfchange/permutation.hpp"
#include "surfchange/report.hpp"
#include "surfchange/roughness.hpp"
#include "surfchange/simulation.hpp"
#include "surfchange/stat_core.hpp"
#include "surfchange/surface_io.hpp"
#include "surfchange/synthetic.hpp"
