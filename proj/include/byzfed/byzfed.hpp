#pragma once

#include "byzfed/aggregation.hpp"
#include "byzfed/attacks.hpp"
#include "byzfed/bounds.hpp"
#include "byzfed/errors.hpp"
#include "byzfed/fusion.hpp"
#include "byzfed/kernel.hpp"
#include "byzfed/local_gpr.hpp"
#include "byzfed/harness/config.hpp"
#include "byzfed/harness/dataset.hpp"
#include "byzfed/harness/report.hpp"
#include "byzfed/harness/simulation.hpp"
#include "byzfed/harness/toy.hpp"
