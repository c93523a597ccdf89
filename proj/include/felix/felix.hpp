// Umbrella header.

#pragma once

#include "felix/align.hpp"
#include "felix/autodiff.hpp"
#include "felix/checkpoint.hpp"
#include "felix/core.hpp"
#include "felix/edit.hpp"
#include "felix/encoder.hpp"
#include "felix/insertion.hpp"
#include "felix/jsonl.hpp"
#include "felix/metrics.hpp"
#include "felix/model.hpp"
#include "felix/realize.hpp"
#include "felix/tensor.hpp"
