#pragma once

#include "lcfusion/accuracy.hpp"
#include "lcfusion/clustering.hpp"
#include "lcfusion/entropy.hpp"
#include "lcfusion/error.hpp"
#include "lcfusion/fusion.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/landscape.hpp"
#include "lcfusion/pipeline.hpp"
#include "lcfusion/raster_io.hpp"
#include "lcfusion/regularize.hpp"
#include "lcfusion/synth.hpp"
#include "lcfusion/weights.hpp"
