#pragma once

#include "sparse_evo/activation_log.hpp"
#include "sparse_evo/analysis.hpp"
#include "sparse_evo/data.hpp"
#include "sparse_evo/errors.hpp"
#include "sparse_evo/evolution.hpp"
#include "sparse_evo/model.hpp"
#include "sparse_evo/policy.hpp"
#include "sparse_evo/serialization.hpp"
#include "sparse_evo/topology.hpp"
#include "sparse_evo/trainer.hpp"
#include "sparse_evo/run.hpp"
