#pragma once

#include "lcgap/config.hpp"
#include "lcgap/dataset_io.hpp"
#include "lcgap/descriptor.hpp"
#include "lcgap/elements.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/evaluation.hpp"
#include "lcgap/gap.hpp"
#include "lcgap/grid_search.hpp"
#include "lcgap/hyperopt.hpp"
#include "lcgap/kernel.hpp"
#include "lcgap/model_io.hpp"
#include "lcgap/molecule.hpp"
#include "lcgap/parallel.hpp"
#include "lcgap/report_io.hpp"
