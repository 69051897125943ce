#pragma once

#include "tsfall/baselines/features.hpp"
#include "tsfall/baselines/lstm.hpp"
#include "tsfall/baselines/svm.hpp"
#include "tsfall/baselines/tree.hpp"
