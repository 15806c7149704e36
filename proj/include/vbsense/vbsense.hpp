#pragma once

#include "vbsense/beam.hpp"
#include "vbsense/errors.hpp"
#include "vbsense/grid.hpp"
#include "vbsense/io.hpp"
#include "vbsense/obstruction.hpp"
#include "vbsense/polarimetry.hpp"
#include "vbsense/random.hpp"
#include "vbsense/sensing.hpp"
#include "vbsense/tracking.hpp"
