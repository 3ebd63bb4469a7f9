#pragma once

#include "rfseq/harness/common.hpp"
#include "rfseq/harness/experiment.hpp"
#include "rfseq/harness/generate.hpp"
