#pragma once

#include "oodkit/bench.hpp"
#include "oodkit/core.hpp"
#include "oodkit/dsgf.hpp"
#include "oodkit/eval.hpp"
#include "oodkit/knn.hpp"
#include "oodkit/manifest.hpp"
#include "oodkit/npy.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/scores.hpp"
#include "oodkit/synth.hpp"
#include "oodkit/types.hpp"
