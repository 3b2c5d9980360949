#pragma once

#include "tvarch/error.hpp"
#include "tvarch/estimate.hpp"
#include "tvarch/experiment.hpp"
#include "tvarch/hypothesis.hpp"
#include "tvarch/io.hpp"
#include "tvarch/json_io.hpp"
#include "tvarch/kernel.hpp"
#include "tvarch/linalg.hpp"
#include "tvarch/model.hpp"
#include "tvarch/parallel.hpp"
#include "tvarch/pipeline.hpp"
#include "tvarch/rng.hpp"
#include "tvarch/select.hpp"
#include "tvarch/simulate.hpp"
#include "tvarch/smoothing.hpp"
