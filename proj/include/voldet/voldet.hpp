#pragma once

// Umbrella header: the whole toolkit.

#include "voldet/augment.hpp"
#include "voldet/box.hpp"
#include "voldet/config.hpp"
#include "voldet/csv.hpp"
#include "voldet/detect.hpp"
#include "voldet/froc.hpp"
#include "voldet/losses.hpp"
#include "voldet/mask.hpp"
#include "voldet/mvol.hpp"
#include "voldet/numeric.hpp"
#include "voldet/phantom.hpp"
#include "voldet/pipeline.hpp"
#include "voldet/rng.hpp"
#include "voldet/sampler.hpp"
#include "voldet/topology.hpp"
#include "voldet/types.hpp"
#include "voldet/volume.hpp"
