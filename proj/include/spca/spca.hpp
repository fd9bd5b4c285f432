#pragma once

// Everything in one include.

#include "spca/baselines.hpp"
#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/estimator.hpp"
#include "spca/experiments.hpp"
#include "spca/io.hpp"
#include "spca/master_milp.hpp"
#include "spca/outer_loop.hpp"
#include "spca/parallel.hpp"
#include "spca/qp_subproblem.hpp"
#include "spca/random.hpp"
#include "spca/spiked_model.hpp"
#include "spca/support.hpp"
