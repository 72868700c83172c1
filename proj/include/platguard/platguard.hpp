#pragma once

#include "platguard/bench_eval.hpp"
#include "platguard/errors.hpp"
#include "platguard/presets.hpp"
#include "platguard/safety_pipeline.hpp"
#include "platguard/scenario_sim.hpp"
#include "platguard/station_geometry.hpp"
#include "platguard/tensor_io.hpp"
#include "platguard/train_state.hpp"
#include "platguard/yolox_post.hpp"
