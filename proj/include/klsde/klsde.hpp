#pragma once

#include "klsde/errors.hpp"
#include "klsde/matkit.hpp"
#include "klsde/phifn.hpp"
#include "klsde/klprocess.hpp"
#include "klsde/sampler.hpp"
#include "klsde/moments.hpp"
#include "klsde/baselines.hpp"
#include "klsde/parallel.hpp"
#include "klsde/experiments.hpp"
