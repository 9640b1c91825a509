#pragma once

#include "featline/baselines.hpp"
#include "featline/bdfla.hpp"
#include "featline/config.hpp"
#include "featline/dataset.hpp"
#include "featline/errors.hpp"
#include "featline/featureline.hpp"
#include "featline/harness.hpp"
#include "featline/matcore.hpp"
#include "featline/model_io.hpp"
#include "featline/rng.hpp"
