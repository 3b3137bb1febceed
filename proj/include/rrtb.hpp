#pragma once

#include "rrtb/rng.hpp"
#include "rrtb/tree.hpp"
#include "rrtb/tree_gen.hpp"
#include "rrtb/broadcast.hpp"
#include "rrtb/tree_struct.hpp"
#include "rrtb/isomorphism.hpp"
#include "rrtb/estimators.hpp"
#include "rrtb/moments.hpp"
#include "rrtb/io.hpp"
#include "rrtb/harness.hpp"
