#pragma once

#include "csar/checkpoint.hpp"
#include "csar/config.hpp"
#include "csar/consensus_graph.hpp"
#include "csar/csar_trainer.hpp"
#include "csar/experiment.hpp"
#include "csar/grid.hpp"
#include "csar/metrics.hpp"
#include "csar/qfunction.hpp"
#include "csar/replay_buffer.hpp"
#include "csar/rng.hpp"
#include "csar/suction_env.hpp"
