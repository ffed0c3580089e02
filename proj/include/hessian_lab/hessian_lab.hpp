#pragma once

#include "hessian_lab/abp_toolkit.hpp"
#include "hessian_lab/config.hpp"
#include "hessian_lab/errors.hpp"
#include "hessian_lab/estimate_lab.hpp"
#include "hessian_lab/expression.hpp"
#include "hessian_lab/field_io.hpp"
#include "hessian_lab/gradient_lab.hpp"
#include "hessian_lab/grid.hpp"
#include "hessian_lab/grid_geometry.hpp"
#include "hessian_lab/parallel.hpp"
#include "hessian_lab/reports.hpp"
#include "hessian_lab/runner.hpp"
#include "hessian_lab/solver.hpp"
#include "hessian_lab/spectral.hpp"
#include "hessian_lab/symmetric_operators.hpp"
#include "hessian_lab/weak_harness.hpp"
