#pragma once

#include "netflow/directions.hpp"
#include "netflow/error.hpp"
#include "netflow/experiment.hpp"
#include "netflow/flow_problem.hpp"
#include "netflow/graph.hpp"
#include "netflow/line_search.hpp"
#include "netflow/simulator.hpp"
