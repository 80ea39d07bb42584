#pragma once

// Umbrella header for the thermal face-temperature toolkit.

#include "thermo/annotations.hpp"
#include "thermo/crossval.hpp"
#include "thermo/detection.hpp"
#include "thermo/detectors.hpp"
#include "thermo/deteval.hpp"
#include "thermo/error.hpp"
#include "thermo/external_adapter.hpp"
#include "thermo/frame.hpp"
#include "thermo/keyvalue.hpp"
#include "thermo/model_io.hpp"
#include "thermo/overlay.hpp"
#include "thermo/pipeline.hpp"
#include "thermo/random.hpp"
#include "thermo/regression.hpp"
#include "thermo/synthscene.hpp"
#include "thermo/text_util.hpp"
