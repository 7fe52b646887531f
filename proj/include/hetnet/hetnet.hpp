#pragma once

#include "hetnet/association.hpp"
#include "hetnet/channel.hpp"
#include "hetnet/engine.hpp"
#include "hetnet/experiments.hpp"
#include "hetnet/matrix.hpp"
#include "hetnet/metrics.hpp"
#include "hetnet/netmodel.hpp"
#include "hetnet/powerctl.hpp"
#include "hetnet/report.hpp"
#include "hetnet/scenario.hpp"
#include "hetnet/scheduler.hpp"
#include "hetnet/sleepwake.hpp"
