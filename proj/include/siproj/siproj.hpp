#pragma once

#include "siproj/core.hpp"
#include "siproj/objectives.hpp"
#include "siproj/optimizers.hpp"
#include "siproj/analysis.hpp"
#include "siproj/harness/config.hpp"
#include "siproj/harness/schedule.hpp"
#include "siproj/harness/trajectory_io.hpp"
#include "siproj/harness/experiment.hpp"
#include "siproj/harness/runner.hpp"
