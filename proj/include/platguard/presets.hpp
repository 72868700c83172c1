#pragma once

#include "platguard/safety_pipeline.hpp"
#include "platguard/scenario_sim.hpp"

namespace platguard {

/// Pipeline configuration matching builtin_station() and the built-in scenarios.
inline PipelineConfig builtin_pipeline_config() {
    PipelineConfig c;
    c.decode.person_class_id = kPersonClass;
    c.decode.train_class_id = kTrainClass;
    c.zones = builtin_station().zones;
    c.camera = CameraModel{3.0, 6.0};
    return c;
}

}  // namespace platguard
