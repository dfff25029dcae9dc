#ifndef RLM_RLM_HPP_
#define RLM_RLM_HPP_

#include "rlm/core.hpp"
#include "rlm/manifolds.hpp"
#include "rlm/least_squares.hpp"
#include "rlm/solver.hpp"
#include "rlm/baselines.hpp"
#include "rlm/problems.hpp"
#include "rlm/io.hpp"
#include "rlm/bench.hpp"

#endif  // RLM_RLM_HPP_
