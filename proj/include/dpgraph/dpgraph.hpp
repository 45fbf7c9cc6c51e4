#pragma once

#include "dpgraph/errors.hpp"
#include "dpgraph/estimator.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/jacobian.hpp"
#include "dpgraph/model.hpp"
#include "dpgraph/privacy.hpp"
#include "dpgraph/rng.hpp"
#include "dpgraph/simulation.hpp"
#include "dpgraph/stats.hpp"
