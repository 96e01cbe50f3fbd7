#ifndef GMEEFP_GMEEFP_HPP
#define GMEEFP_GMEEFP_HPP

#include "gmeefp/numerics.hpp"
#include "gmeefp/state_space.hpp"
#include "gmeefp/ckf.hpp"
#include "gmeefp/criterion.hpp"
#include "gmeefp/gmeefp_ckf.hpp"
#include "gmeefp/experiments.hpp"
#include "gmeefp/version.hpp"

#endif  // GMEEFP_GMEEFP_HPP
