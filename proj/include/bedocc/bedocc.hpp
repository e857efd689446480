#pragma once

#include "bedocc/common.hpp"
#include "bedocc/signal.hpp"
#include "bedocc/features.hpp"
#include "bedocc/smote.hpp"
#include "bedocc/metrics.hpp"
#include "bedocc/nn/layers.hpp"
#include "bedocc/nn/model.hpp"
#include "bedocc/detectors.hpp"
#include "bedocc/cv.hpp"
#include "bedocc/synthgen.hpp"
#include "bedocc/monitor.hpp"
#include "bedocc/io.hpp"
