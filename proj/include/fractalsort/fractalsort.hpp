#pragma once
// Umbrella header.

#include "fractalsort/bits.hpp"
#include "fractalsort/metrics.hpp"
#include "fractalsort/fractal_histogram.hpp"
#include "fractalsort/bin_sorter.hpp"
#include "fractalsort/baselines.hpp"
#include "fractalsort/batch_engine.hpp"
#include "fractalsort/dataset.hpp"
