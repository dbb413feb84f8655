#pragma once

#include "skglass/bounds.hpp"
#include "skglass/disorder.hpp"
#include "skglass/dynamics.hpp"
#include "skglass/errors.hpp"
#include "skglass/gapped.hpp"
#include "skglass/harness.hpp"
#include "skglass/model.hpp"
#include "skglass/numerics.hpp"
#include "skglass/rng.hpp"
#include "skglass/spectral.hpp"
