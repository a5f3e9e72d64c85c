#pragma once

// Convenience umbrella: pulls in the whole workbench.

#include "advtrain.hpp"
#include "attacks.hpp"
#include "common.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "detectors.hpp"
#include "gbdt.hpp"
#include "image.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "pipeline.hpp"
