#pragma once

#include "quadspine/types.hpp"
#include "quadspine/lie.hpp"
#include "quadspine/model.hpp"
#include "quadspine/gait.hpp"
#include "quadspine/spine.hpp"
#include "quadspine/qp.hpp"
#include "quadspine/mpc.hpp"
#include "quadspine/sim.hpp"
#include "quadspine/log_io.hpp"
#include "quadspine/metrics.hpp"
#include "quadspine/config.hpp"
#include "quadspine/optimize.hpp"
#include "quadspine/study.hpp"
