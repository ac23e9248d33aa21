#pragma once

// Umbrella header for the memory-augmented multi-branch emotion
// distribution learner.

#include "samnet/core/errors.hpp"
#include "samnet/core/init.hpp"
#include "samnet/core/linalg.hpp"
#include "samnet/core/rng.hpp"
#include "samnet/data/dataset.hpp"
#include "samnet/data/generator.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/matching/hungarian.hpp"
#include "samnet/metrics/metrics.hpp"
#include "samnet/model/checkpoint.hpp"
#include "samnet/model/inspect.hpp"
#include "samnet/model/model.hpp"
#include "samnet/train/adam.hpp"
#include "samnet/train/config.hpp"
#include "samnet/train/grad_check.hpp"
#include "samnet/train/reference_loss.hpp"
#include "samnet/train/trainer.hpp"
