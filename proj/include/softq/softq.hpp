#pragma once

#include "softq/common.hpp"
#include "softq/config.hpp"
#include "softq/dataset.hpp"
#include "softq/kinematics.hpp"
#include "softq/metrics.hpp"
#include "softq/mlp.hpp"
#include "softq/pipeline.hpp"
#include "softq/plant.hpp"
#include "softq/sac.hpp"
#include "softq/surrogate.hpp"
