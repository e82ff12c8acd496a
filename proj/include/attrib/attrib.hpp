#pragma once

#include "attrib/brinson.hpp"
#include "attrib/core.hpp"
#include "attrib/csv.hpp"
#include "attrib/data_model.hpp"
#include "attrib/inference.hpp"
#include "attrib/ingestion.hpp"
#include "attrib/parallel.hpp"
#include "attrib/pipeline.hpp"
#include "attrib/regression.hpp"
#include "attrib/rng.hpp"
#include "attrib/synthetic.hpp"
#include "attrib/workspace.hpp"
