// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include "bncrowd/core.hpp"
#include "bncrowd/error.hpp"
#include "bncrowd/eval.hpp"
#include "bncrowd/gibbs_state.hpp"
#include "bncrowd/model.hpp"
#include "bncrowd/sampler.hpp"
#include "bncrowd/special.hpp"
#include "bncrowd/synthgen.hpp"
