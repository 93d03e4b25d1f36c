#ifndef SANOVSIM_SANOVSIM_HPP
#define SANOVSIM_SANOVSIM_HPP

#include "sanovsim/error.hpp"
#include "sanovsim/lp.hpp"
#include "sanovsim/measures.hpp"
#include "sanovsim/outcome_map.hpp"
#include "sanovsim/random.hpp"
#include "sanovsim/rates.hpp"
#include "sanovsim/reversal.hpp"
#include "sanovsim/scenario.hpp"
#include "sanovsim/simulation.hpp"

#endif  // SANOVSIM_SANOVSIM_HPP
