#pragma once

#include "pcbf/common.hpp"
#include "pcbf/mlp.hpp"
#include "pcbf/gradcheck.hpp"
#include "pcbf/checkpoint.hpp"
#include "pcbf/systems.hpp"
#include "pcbf/barrier.hpp"
#include "pcbf/sampler.hpp"
#include "pcbf/losses.hpp"
#include "pcbf/pareto.hpp"
#include "pcbf/trainer.hpp"
#include "pcbf/hjgrid.hpp"
#include "pcbf/qp_filter.hpp"
#include "pcbf/nominal.hpp"
#include "pcbf/simulate.hpp"
#include "pcbf/volume.hpp"
