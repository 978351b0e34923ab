/**
 * @file
 * @brief Umbrella header.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include "analysis.hpp"
#include "common.hpp"
#include "corpus.hpp"
#include "gradcheck.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "persistence.hpp"
#include "rate_algebra.hpp"
#include "trainer.hpp"
