#pragma once

#include "ablate/ablation.hpp"
#include "ablate/boundary.hpp"
#include "ablate/cost.hpp"
#include "ablate/errors.hpp"
#include "ablate/feedback.hpp"
#include "ablate/geometry.hpp"
#include "ablate/graph_planner.hpp"
#include "ablate/io.hpp"
#include "ablate/sampling.hpp"
#include "ablate/scenario.hpp"
#include "ablate/superposition.hpp"
