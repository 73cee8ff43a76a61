#pragma once

#include "pine/conformal.hpp"
#include "pine/dataio.hpp"
#include "pine/encoding.hpp"
#include "pine/ensemble.hpp"
#include "pine/error.hpp"
#include "pine/eval.hpp"
#include "pine/log.hpp"
#include "pine/milp.hpp"
#include "pine/oracle.hpp"
#include "pine/pine.hpp"
#include "pine/plausibility.hpp"
#include "pine/pruner.hpp"
#include "pine/rng.hpp"
#include "pine/synth.hpp"
#include "pine/trainer.hpp"
#include "pine/verify.hpp"
