#pragma once

// Umbrella header for the drowsiness-detection toolkit.

#include "ddd/dataset.hpp"
#include "ddd/errors.hpp"
#include "ddd/events.hpp"
#include "ddd/feature_vector.hpp"
#include "ddd/features.hpp"
#include "ddd/labeling.hpp"
#include "ddd/models.hpp"
#include "ddd/multiwavelet.hpp"
#include "ddd/numeric.hpp"
#include "ddd/pipeline.hpp"
#include "ddd/selection.hpp"
#include "ddd/signal.hpp"
#include "ddd/table.hpp"
