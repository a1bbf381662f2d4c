// Umbrella header.
#pragma once

#include "dfl/core.hpp"
#include "dfl/oracles.hpp"
#include "dfl/targets.hpp"
#include "dfl/eval.hpp"
#include "dfl/learning.hpp"
#include "dfl/datagen.hpp"
#include "dfl/bench.hpp"
