#pragma once

#include "ecomem/error.hpp"
#include "ecomem/dataset.hpp"
#include "ecomem/spline.hpp"
#include "ecomem/formula.hpp"
#include "ecomem/model.hpp"
#include "ecomem/sampler.hpp"
#include "ecomem/diagnostics.hpp"
#include "ecomem/simulate.hpp"
#include "ecomem/fit.hpp"
#include "ecomem/io.hpp"
#include "ecomem/svg.hpp"
