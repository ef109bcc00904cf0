#pragma once

#include "locabc/error.hpp"
#include "locabc/core.hpp"
#include "locabc/rng.hpp"
#include "locabc/table_io.hpp"
#include "locabc/simulators.hpp"
#include "locabc/summaries.hpp"
#include "locabc/moments.hpp"
#include "locabc/projections.hpp"
#include "locabc/inference.hpp"
#include "locabc/models.hpp"
#include "locabc/config.hpp"
#include "locabc/experiment.hpp"
#include "locabc/report.hpp"
