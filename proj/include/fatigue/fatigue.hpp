#pragma once

#include "fatigue/accounting.hpp"
#include "fatigue/conv.hpp"
#include "fatigue/errors.hpp"
#include "fatigue/feature_map.hpp"
#include "fatigue/features.hpp"
#include "fatigue/io.hpp"
#include "fatigue/losses.hpp"
#include "fatigue/lstm.hpp"
#include "fatigue/nn.hpp"
#include "fatigue/scenario.hpp"
#include "fatigue/sequence.hpp"
