#ifndef PATHFINDER_HPP
#define PATHFINDER_HPP

#include "pathfinder/compact_factors.hpp"
#include "pathfinder/elbo.hpp"
#include "pathfinder/errors.hpp"
#include "pathfinder/inv_hessian.hpp"
#include "pathfinder/lbfgs.hpp"
#include "pathfinder/multipath.hpp"
#include "pathfinder/normal_approx.hpp"
#include "pathfinder/parallel.hpp"
#include "pathfinder/pathfinder.hpp"
#include "pathfinder/psis.hpp"
#include "pathfinder/random.hpp"
#include "pathfinder/run_config.hpp"
#include "pathfinder/targets.hpp"
#include "pathfinder/wasserstein.hpp"

#endif  // PATHFINDER_HPP
