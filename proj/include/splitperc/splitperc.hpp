#pragma once

#include "splitperc/error.hpp"
#include "splitperc/rng.hpp"
#include "splitperc/sampling.hpp"
#include "splitperc/splitvec.hpp"
#include "splitperc/treegen.hpp"
#include "splitperc/perc.hpp"
#include "splitperc/regtree.hpp"
#include "splitperc/limitlaw.hpp"
#include "splitperc/renewal.hpp"
#include "splitperc/stats.hpp"
#include "splitperc/harness.hpp"
