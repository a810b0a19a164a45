#pragma once

#include "curvature.hpp"
#include "errors.hpp"
#include "estimates.hpp"
#include "families.hpp"
#include "graph.hpp"
#include "heat.hpp"
#include "io.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "positive_curvature.hpp"
#include "report.hpp"
#include "version.hpp"
