#pragma once

#include "nashflow/error.hpp"
#include "nashflow/rng.hpp"
#include "nashflow/game_point.hpp"
#include "nashflow/convex_set.hpp"
#include "nashflow/game.hpp"
#include "nashflow/audit.hpp"
#include "nashflow/flow.hpp"
#include "nashflow/problems.hpp"
#include "nashflow/grid.hpp"
#include "nashflow/legendre.hpp"
#include "nashflow/pde.hpp"
#include "nashflow/io.hpp"
