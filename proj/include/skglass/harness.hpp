#pragma once

#include "skglass/harness/config.hpp"
#include "skglass/harness/fit.hpp"
#include "skglass/harness/record.hpp"
#include "skglass/harness/report.hpp"
#include "skglass/harness/runner.hpp"
#include "skglass/harness/svg.hpp"
