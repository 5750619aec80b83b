#pragma once

#include "crep/errors.hpp"
#include "crep/grid_model.hpp"
#include "crep/power_flow.hpp"
#include "crep/lyapunov.hpp"
#include "crep/linearize.hpp"
#include "crep/crep_metric.hpp"
#include "crep/rng.hpp"
#include "crep/hitting_time.hpp"
#include "crep/stability_metrics.hpp"
#include "crep/optimizer.hpp"
#include "crep/io.hpp"
