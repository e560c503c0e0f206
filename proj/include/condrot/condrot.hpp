#ifndef CONDROT_CONDROT_HPP
#define CONDROT_CONDROT_HPP

#include "analysis.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "keyvalue.hpp"
#include "polarization.hpp"
#include "random.hpp"
#include "scenario.hpp"
#include "simulation.hpp"
#include "statistics.hpp"

#endif
