#pragma once

#include "argox/audit.hpp"
#include "argox/backtest.hpp"
#include "argox/blp.hpp"
#include "argox/csv.hpp"
#include "argox/enrichment.hpp"
#include "argox/epiweek.hpp"
#include "argox/error.hpp"
#include "argox/evaluation.hpp"
#include "argox/first_step.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/lasso.hpp"
#include "argox/panel.hpp"
#include "argox/routing.hpp"
#include "argox/second_step_joint.hpp"
#include "argox/second_step_standalone.hpp"
#include "argox/synthetic.hpp"
