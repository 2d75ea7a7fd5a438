#pragma once

#include "whittaker/error.hpp"
#include "whittaker/model.hpp"
#include "whittaker/csv.hpp"
#include "whittaker/noise.hpp"
#include "whittaker/logquad.hpp"
#include "whittaker/skorokhod.hpp"
#include "whittaker/sde.hpp"
#include "whittaker/rate.hpp"
#include "whittaker/varopt.hpp"
#include "whittaker/mc.hpp"
