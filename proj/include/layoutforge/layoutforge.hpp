#pragma once

#include "layoutforge/condition.hpp"
#include "layoutforge/config.hpp"
#include "layoutforge/dataio.hpp"
#include "layoutforge/denoiser.hpp"
#include "layoutforge/diffusion.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/evaluate.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/metrics.hpp"
#include "layoutforge/raster.hpp"
#include "layoutforge/rng.hpp"
#include "layoutforge/rules.hpp"
#include "layoutforge/sampler.hpp"
#include "layoutforge/service.hpp"
#include "layoutforge/train.hpp"
