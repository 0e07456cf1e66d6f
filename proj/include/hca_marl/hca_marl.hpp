#pragma once

#include "hca_marl/adam.hpp"
#include "hca_marl/checkpoint.hpp"
#include "hca_marl/compare.hpp"
#include "hca_marl/config.hpp"
#include "hca_marl/envs/env.hpp"
#include "hca_marl/envs/episode_log.hpp"
#include "hca_marl/envs/factory.hpp"
#include "hca_marl/envs/geometry.hpp"
#include "hca_marl/envs/soccer.hpp"
#include "hca_marl/envs/tennis.hpp"
#include "hca_marl/error.hpp"
#include "hca_marl/harness.hpp"
#include "hca_marl/hca.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/policy.hpp"
#include "hca_marl/ppo.hpp"
#include "hca_marl/rollout.hpp"
