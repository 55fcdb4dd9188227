#ifndef TPSIM_TPSIM_HPP
#define TPSIM_TPSIM_HPP

#include "tpsim/errors.hpp"
#include "tpsim/rng.hpp"
#include "tpsim/machine/machine.hpp"
#include "tpsim/attacks/attack.hpp"
#include "tpsim/leakage/leakage.hpp"
#include "tpsim/harness/config_file.hpp"
#include "tpsim/harness/io.hpp"
#include "tpsim/harness/experiment.hpp"
#include "tpsim/harness/sweep.hpp"

#endif  // TPSIM_TPSIM_HPP
