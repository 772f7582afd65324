#pragma once

#include "ccfel/errors.hpp"
#include "ccfel/rng.hpp"
#include "ccfel/model.hpp"
#include "ccfel/bivariate_ou.hpp"
#include "ccfel/path.hpp"
#include "ccfel/simulate.hpp"
#include "ccfel/grid.hpp"
#include "ccfel/el_dual.hpp"
#include "ccfel/nelder_mead.hpp"
#include "ccfel/el_estimator.hpp"
#include "ccfel/likelihood.hpp"
#include "ccfel/parallel.hpp"
#include "ccfel/spec_test.hpp"
#include "ccfel/study.hpp"
