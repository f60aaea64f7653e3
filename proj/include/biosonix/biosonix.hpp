#pragma once

#include "analysis.hpp"
#include "anatomy.hpp"
#include "biomech.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "fft.hpp"
#include "geometry.hpp"
#include "mapping.hpp"
#include "network.hpp"
#include "pipeline.hpp"
#include "render.hpp"
#include "scenario.hpp"
#include "signal.hpp"
#include "trace_io.hpp"
#include "wav.hpp"
