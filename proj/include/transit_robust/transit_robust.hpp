#pragma once

#include "transit_robust/common.hpp"
#include "transit_robust/features.hpp"
#include "transit_robust/instance_gen.hpp"
#include "transit_robust/io.hpp"
#include "transit_robust/network.hpp"
#include "transit_robust/parallel.hpp"
#include "transit_robust/rng.hpp"
#include "transit_robust/robustness.hpp"
#include "transit_robust/search.hpp"
#include "transit_robust/simulation.hpp"
#include "transit_robust/surrogate.hpp"
