#pragma once

// Umbrella header: the sweep engine, measure catalog, statistics, and
// reporting layers in one include.

#include "genmeter/autodiff.hpp"
#include "genmeter/config.hpp"
#include "genmeter/curvature.hpp"
#include "genmeter/data.hpp"
#include "genmeter/errors.hpp"
#include "genmeter/format.hpp"
#include "genmeter/measures/calibration.hpp"
#include "genmeter/measures/catalog.hpp"
#include "genmeter/measures/compute.hpp"
#include "genmeter/measures/gradients.hpp"
#include "genmeter/measures/info_criteria.hpp"
#include "genmeter/measures/margins.hpp"
#include "genmeter/measures/pac_bayes.hpp"
#include "genmeter/measures/settings.hpp"
#include "genmeter/measures/sharpness.hpp"
#include "genmeter/measures/spectral.hpp"
#include "genmeter/model.hpp"
#include "genmeter/optim.hpp"
#include "genmeter/params.hpp"
#include "genmeter/report.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/stats.hpp"
#include "genmeter/store.hpp"
#include "genmeter/summary.hpp"
#include "genmeter/tensor.hpp"
#include "genmeter/train.hpp"
