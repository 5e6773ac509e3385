// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "featuremark/attacks.hpp"
#include "featuremark/calibration.hpp"
#include "featuremark/detect.hpp"
#include "featuremark/embed.hpp"
#include "featuremark/errors.hpp"
#include "featuremark/features.hpp"
#include "featuremark/generator.hpp"
#include "featuremark/harness.hpp"
#include "featuremark/hash.hpp"
#include "featuremark/keying.hpp"
#include "featuremark/metrics.hpp"
#include "featuremark/random.hpp"
#include "featuremark/stats.hpp"
#include "featuremark/text_units.hpp"
#include "featuremark/theory.hpp"
#include "featuremark/tokenize.hpp"

// Network adapters pull in cpp-httplib; include them explicitly:
//   featuremark/remote_generator.hpp, featuremark/remote_extractor.hpp
