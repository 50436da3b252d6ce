#pragma once

// Umbrella header.

#include "spheregan/autodiff.hpp"
#include "spheregan/checkpoint.hpp"
#include "spheregan/common.hpp"
#include "spheregan/config.hpp"
#include "spheregan/data.hpp"
#include "spheregan/evaluation.hpp"
#include "spheregan/geometry.hpp"
#include "spheregan/image_io.hpp"
#include "spheregan/losses.hpp"
#include "spheregan/metrics.hpp"
#include "spheregan/model.hpp"
#include "spheregan/ops.hpp"
#include "spheregan/rng.hpp"
#include "spheregan/tensor.hpp"
#include "spheregan/training.hpp"
