#pragma once

#include "bigramfm/common.hpp"
#include "bigramfm/vocabulary.hpp"
#include "bigramfm/dataset.hpp"
#include "bigramfm/stats.hpp"
#include "bigramfm/model_config.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/scoring.hpp"
#include "bigramfm/loss.hpp"
#include "bigramfm/adam.hpp"
#include "bigramfm/sampler.hpp"
#include "bigramfm/evaluator.hpp"
#include "bigramfm/trainer.hpp"
