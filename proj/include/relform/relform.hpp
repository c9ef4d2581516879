#pragma once

#include "relform/errors.hpp"
#include "relform/graph.hpp"
#include "relform/stochastics.hpp"
#include "relform/models.hpp"
#include "relform/estimators.hpp"
#include "relform/simkit.hpp"
#include "relform/scenario_io.hpp"
#include "relform/commands.hpp"
