#pragma once

#include "confset/density.hpp"
#include "confset/estimator.hpp"
#include "confset/inference.hpp"
#include "confset/io.hpp"
#include "confset/quad_stat.hpp"
#include "confset/report.hpp"
#include "confset/rng.hpp"
#include "confset/sim.hpp"
#include "confset/wavelet.hpp"
