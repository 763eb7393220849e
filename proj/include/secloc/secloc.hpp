#ifndef SECLOC_SECLOC_HPP
#define SECLOC_SECLOC_HPP

#include "secloc/attack_sim.hpp"
#include "secloc/channel_model.hpp"
#include "secloc/crlb.hpp"
#include "secloc/errors.hpp"
#include "secloc/estimators.hpp"
#include "secloc/l1_fit.hpp"
#include "secloc/random.hpp"
#include "secloc/topology_io.hpp"

#endif  // SECLOC_SECLOC_HPP
