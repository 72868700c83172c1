#include "platguard/safety_pipeline.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "platguard/presets.hpp"
#include "platguard/scenario_sim.hpp"
#include "platguard/verification/reference.hpp"

namespace platguard {
namespace {

struct Rendered {
    TensorStreamHeader header;
    std::vector<RawTensorSet> frames;
    std::vector<GroundTruthFrame> truth;
};

Rendered render(const ScenarioSpec& spec) {
    const auto cfg = builtin_pipeline_config();
    auto truth = generate_scenario(spec);
    auto [h, frames] = render_scenario(spec, truth, cfg.decode);
    return {h, std::move(frames), std::move(truth)};
}

CollectingSink run_collect(const Rendered& r, const PipelineConfig& cfg, RunSummary* summary = nullptr) {
    MemoryBackend backend(r.header, r.frames);
    CollectingSink sink;
    const auto s = run_pipeline(backend, cfg, sink);
    if (summary) *summary = s;
    return sink;
}

GroundTruthFrame one_frame(std::vector<GroundTruthObject> objs) {
    GroundTruthFrame f;
    f.objects = std::move(objs);
    return f;
}

RawTensorSet encode(const GroundTruthFrame& f) {
    return encode_objects_to_tensors(f, builtin_pipeline_config().decode, 8, 320, 192);
}

TEST(SeverityFor, Table) {
    EXPECT_EQ(severity_for(TrainState::In, ZoneKind::Danger), Severity::Critical);
    EXPECT_EQ(severity_for(TrainState::On, ZoneKind::Danger), Severity::Warning);
    EXPECT_EQ(severity_for(TrainState::Out, ZoneKind::Danger), Severity::Warning);
    EXPECT_EQ(severity_for(TrainState::Off, ZoneKind::Danger), Severity::Caution);
    for (auto s : {TrainState::Off, TrainState::In, TrainState::On, TrainState::Out}) {
        EXPECT_FALSE(severity_for(s, ZoneKind::Monitor).has_value());
        EXPECT_FALSE(severity_for(s, ZoneKind::Risk).has_value());
    }
}

TEST(ProcessFrame, TrainOnlyFrameHasNoAlerts) {
    const auto cfg = builtin_pipeline_config();
    TrainStateMachine fsm(cfg.fsm);
    const auto r = process_frame(encode(one_frame({{kTrainClass, {100, 20, 300, 84}, 0, 0.9}})), cfg, fsm);
    ASSERT_EQ(r.detections.size(), 1u);
    EXPECT_EQ(r.detections[0].class_id, kTrainClass);
    EXPECT_TRUE(r.alerts.empty());
    EXPECT_EQ(r.state, TrainState::In);
    ASSERT_TRUE(r.transition.has_value());
    EXPECT_EQ(r.transition->to, TrainState::In);
}

TEST(ProcessFrame, PersonInDangerWhileTrainInIsCritical) {
    // Person ground point (100, 100) is inside the yellow strip y in [88, 112].
    const auto cfg = builtin_pipeline_config();
    TrainStateMachine fsm(cfg.fsm);
    const auto r = process_frame(encode(one_frame({{kTrainClass, {100, 20, 300, 84}, 0, 0.9},
                                                   {kPersonClass, {92, 60, 108, 100}, 1, 0.85}})),
                                 cfg, fsm);
    ASSERT_EQ(r.alerts.size(), 1u);
    EXPECT_EQ(r.alerts[0].severity, Severity::Critical);
    EXPECT_EQ(r.alerts[0].zone, "yellow_line");
    EXPECT_EQ(r.alerts[0].state, TrainState::In);
}

TEST(ProcessFrame, PersonOutsideAllZonesNeverAlerts) {
    auto cfg = builtin_pipeline_config();
    cfg.zones = {{ZoneKind::Risk, {{0, 0}, {320, 0}, {320, 40}, {0, 40}}, "track"},
                 {ZoneKind::Danger, {{0, 40}, {320, 40}, {320, 60}, {0, 60}}, "edge"}};
    TrainStateMachine fsm(cfg.fsm);
    for (int i = 0; i < 4; ++i) {
        const auto r = process_frame(encode(one_frame({{kTrainClass, {0, 0, 200, 38}, 0, 0.9},
                                                       {kPersonClass, {150, 120, 166, 160}, 1, 0.9}})),
                                     cfg, fsm);
        EXPECT_TRUE(r.alerts.empty());
        EXPECT_EQ(r.monitor_presence, 0u);
    }
}

TEST(ProcessFrame, MonitorZoneCountsPresenceOnly) {
    const auto cfg = builtin_pipeline_config();
    TrainStateMachine fsm(cfg.fsm);
    const auto r = process_frame(encode(one_frame({{kPersonClass, {150, 120, 166, 160}, 0, 0.9}})), cfg, fsm);
    EXPECT_TRUE(r.alerts.empty());
    EXPECT_EQ(r.monitor_presence, 1u);
}

TEST(ProcessFrame, DecodeErrorLeavesFsmUntouched) {
    const auto cfg = builtin_pipeline_config();
    TrainStateMachine fsm(cfg.fsm);
    auto f = encode(one_frame({{kTrainClass, {100, 20, 300, 84}, 0, 0.9}}));
    f.outputs[1].data[7] = std::numeric_limits<float>::quiet_NaN();
    f.frame_index = 12;
    const auto r = process_frame(f, cfg, fsm);
    ASSERT_TRUE(r.error.has_value());
    EXPECT_EQ(r.frame_index, 12u);
    EXPECT_EQ(fsm.state(), TrainState::Off);
    EXPECT_FALSE(fsm.last_observation().has_value());
}

TEST(ProcessFrame, HeightResolverAnnotatesAlerts) {
    auto cfg = builtin_pipeline_config();
    cfg.height_resolver = [](const Detection&) { return std::optional<HeightQuery>(HeightQuery{3.0, 1.5, {}}); };
    TrainStateMachine fsm(cfg.fsm);
    const auto r = process_frame(encode(one_frame({{kPersonClass, {92, 60, 108, 100}, 0, 0.85}})), cfg, fsm);
    ASSERT_EQ(r.alerts.size(), 1u);
    ASSERT_TRUE(r.alerts[0].est_height_m.has_value());
    EXPECT_DOUBLE_EQ(*r.alerts[0].est_height_m, 1.5);
    EXPECT_EQ(r.alerts[0].severity, Severity::Caution);

    cfg.height_resolver = {};
    TrainStateMachine fsm2(cfg.fsm);
    const auto r2 = process_frame(encode(one_frame({{kPersonClass, {92, 60, 108, 100}, 0, 0.85}})), cfg, fsm2);
    ASSERT_EQ(r2.alerts.size(), 1u);
    EXPECT_FALSE(r2.alerts[0].est_height_m.has_value());
}

TEST(RunPipeline, BackgroundStream) {
    TensorStreamHeader h;
    h.num_classes = 8;
    h.image_width = 320;
    h.image_height = 192;
    std::vector<RawTensorSet> frames;
    for (std::uint64_t i = 0; i < 3; ++i) frames.push_back(make_uniform_frame(h, i, -20.0f));
    MemoryBackend backend(h, frames);
    CollectingSink sink;
    const auto s = run_pipeline(backend, builtin_pipeline_config(), sink);
    EXPECT_EQ(s.frames, 3u);
    EXPECT_EQ(s.alerts, 0u);
    EXPECT_EQ(s.errors, 0u);
    EXPECT_FALSE(s.aborted);
    EXPECT_EQ(sink.results.size(), 3u);
}

TEST(RunPipeline, CorruptedFrameCountedAndSkipped) {
    auto r = render(crossing_during_approach_scenario());
    r.frames[30].outputs[0].data[123] = std::numeric_limits<float>::quiet_NaN();
    RunSummary s;
    const auto sink = run_collect(r, builtin_pipeline_config(), &s);
    EXPECT_EQ(s.errors, 1u);
    EXPECT_EQ(s.frames, r.frames.size());
    ASSERT_EQ(sink.results.size(), r.frames.size());
    for (const auto& res : sink.results) EXPECT_EQ(res.error.has_value(), res.frame_index == 30);
}

TEST(RunPipeline, CrossingAlertsMatchAnalyticInterval) {
    const auto spec = crossing_during_approach_scenario();
    const auto expected = reference::frames_with_ground_y_in(spec.actors[1], 88, 112);
    ASSERT_FALSE(expected.empty());
    const auto sink = run_collect(render(spec), builtin_pipeline_config());
    std::vector<std::uint32_t> got;
    for (const auto& a : sink.alerts) {
        EXPECT_EQ(a.severity, Severity::Critical);
        got.push_back(static_cast<std::uint32_t>(a.frame_index));
    }
    ASSERT_FALSE(got.empty());
    EXPECT_GE(got.front() + 1, expected.front());
    EXPECT_LE(got.back(), expected.back() + 1);
    EXPECT_GE(got.size() + 2, expected.size());
}

TEST(RunPipeline, EmptyPlatformHasNoAlerts) {
    RunSummary s;
    const auto sink = run_collect(render(empty_platform_scenario()), builtin_pipeline_config(), &s);
    EXPECT_EQ(s.alerts, 0u);
    EXPECT_TRUE(sink.alerts.empty());
}

TEST(RunPipeline, TrainCycleTransitions) {
    const auto sink = run_collect(render(empty_platform_scenario()), builtin_pipeline_config());
    std::vector<std::pair<std::uint64_t, TrainState>> got;
    for (const auto& t : sink.transitions) got.emplace_back(t.frame_index, t.to);
    // Appears at 10, stationary from 40 (41-45 give five zero-motion frames),
    // moves again at 65, gone after 80 (81-85 absent).
    const std::vector<std::pair<std::uint64_t, TrainState>> expected{
        {10, TrainState::In}, {45, TrainState::On}, {65, TrainState::Out}, {85, TrainState::Off}};
    EXPECT_EQ(got, expected);
}

TEST(RunPipeline, ExpressTrainSkipsOn) {
    const auto sink = run_collect(render(express_pass_scenario()), builtin_pipeline_config());
    std::vector<TrainState> to;
    for (const auto& t : sink.transitions) to.push_back(t.to);
    EXPECT_EQ(to, (std::vector{TrainState::In, TrainState::Out, TrainState::Off}));
}

TEST(RunPipeline, AlertsSoundAndComplete) {
    const auto cfg = builtin_pipeline_config();
    for (const auto& [name, spec] : builtin_scenarios()) {
        const auto sink = run_collect(render(spec), cfg);
        std::size_t alert_pos = 0;
        for (const auto& res : sink.results) {
            std::size_t expected_here = 0;
            for (const auto& d : res.detections) {
                if (d.class_id != cfg.decode.person_class_id) continue;
                const Point g{0.5 * (d.box.x1 + d.box.x2), d.box.y2};
                for (const auto& z : cfg.zones)
                    if (z.kind == ZoneKind::Danger && reference::winding_inside(g, z.polygon)) ++expected_here;
            }
            EXPECT_EQ(res.alerts.size(), expected_here) << name << " frame " << res.frame_index;
            for (const auto& a : res.alerts) {
                ASSERT_LT(alert_pos, sink.alerts.size());
                EXPECT_EQ(sink.alerts[alert_pos].frame_index, a.frame_index);
                ++alert_pos;
                const Zone* zone = nullptr;
                for (const auto& z : cfg.zones)
                    if (z.name == a.zone) zone = &z;
                ASSERT_NE(zone, nullptr);
                EXPECT_EQ(zone->kind, ZoneKind::Danger);
                const Point g{0.5 * (a.detection.box.x1 + a.detection.box.x2), a.detection.box.y2};
                EXPECT_TRUE(reference::winding_inside(g, zone->polygon));
                EXPECT_EQ(a.severity, cfg.severity[a.state]);
            }
        }
        EXPECT_EQ(alert_pos, sink.alerts.size());
    }
}

TEST(RunPipeline, FrameOrderedAndDeterministic) {
    const auto r = render(crossing_during_approach_scenario());
    const auto a = run_collect(r, builtin_pipeline_config());
    const auto b = run_collect(r, builtin_pipeline_config());
    for (std::size_t i = 1; i < a.results.size(); ++i)
        EXPECT_LT(a.results[i - 1].frame_index, a.results[i].frame_index);
    for (std::size_t i = 1; i < a.alerts.size(); ++i) EXPECT_LE(a.alerts[i - 1].frame_index, a.alerts[i].frame_index);
    ASSERT_EQ(a.alerts.size(), b.alerts.size());
    for (std::size_t i = 0; i < a.alerts.size(); ++i) EXPECT_EQ(alert_jsonl(a.alerts[i]), alert_jsonl(b.alerts[i]));
    ASSERT_EQ(a.transitions.size(), b.transitions.size());
    for (std::size_t i = 0; i < a.transitions.size(); ++i)
        EXPECT_EQ(transition_jsonl(a.transitions[i]), transition_jsonl(b.transitions[i]));
}

class FailingSink final : public PipelineSink {
public:
    explicit FailingSink(std::uint64_t fail_at) : fail_at_(fail_at) {}
    void on_result(const FrameResult& r) override {
        if (r.frame_index == fail_at_) throw SinkError("disk full");
        ++seen;
    }
    std::uint64_t seen = 0;

private:
    std::uint64_t fail_at_;
};

TEST(RunPipeline, SinkFailureAbortsWithPartialSummary) {
    const auto r = render(empty_platform_scenario());
    MemoryBackend backend(r.header, r.frames);
    FailingSink sink(7);
    const auto s = run_pipeline(backend, builtin_pipeline_config(), sink);
    EXPECT_TRUE(s.aborted);
    EXPECT_EQ(s.frames, 8u);
    EXPECT_EQ(sink.seen, 7u);
    EXPECT_NE(s.abort_reason.find("disk full"), std::string::npos);
}

TEST(RunPipeline, JsonlSinkOnBadStreamAborts) {
    const auto r = render(empty_platform_scenario());
    MemoryBackend backend(r.header, r.frames);
    std::ostringstream bad;
    bad.setstate(std::ios::badbit);
    JsonlSink sink(nullptr, &bad);
    EXPECT_TRUE(run_pipeline(backend, builtin_pipeline_config(), sink).aborted);
}

TEST(RunPipeline, StrideMismatchRejected) {
    const auto r = render(empty_platform_scenario());
    MemoryBackend backend(r.header, r.frames);
    auto cfg = builtin_pipeline_config();
    cfg.decode.strides = {8, 16, 64};
    CollectingSink sink;
    EXPECT_THROW(run_pipeline(backend, cfg, sink), ConfigError);
}

TEST(Config, MissingRiskZoneNamed) {
    auto cfg = builtin_pipeline_config();
    std::erase_if(cfg.zones, [](const Zone& z) { return z.kind == ZoneKind::Risk; });
    try {
        cfg.validate(8);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("RISK"), std::string::npos);
    }
    try {
        pipeline_config_from_json(to_json(cfg));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("RISK"), std::string::npos);
    }
}

TEST(Config, MissingDangerAndDuplicateRisk) {
    auto cfg = builtin_pipeline_config();
    std::erase_if(cfg.zones, [](const Zone& z) { return z.kind == ZoneKind::Danger; });
    EXPECT_THROW(cfg.validate(8), ConfigError);
    cfg = builtin_pipeline_config();
    cfg.zones.push_back(cfg.zones[0]);
    EXPECT_THROW(cfg.validate(8), ConfigError);
}

TEST(Config, JsonRoundTrip) {
    auto cfg = builtin_pipeline_config();
    cfg.severity.danger[0] = Severity::Warning;
    const auto back = pipeline_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
    EXPECT_EQ(back.decode.strides, cfg.decode.strides);
    EXPECT_EQ(back.decode.conf_threshold, cfg.decode.conf_threshold);
    EXPECT_EQ(back.severity, cfg.severity);
    ASSERT_EQ(back.zones.size(), cfg.zones.size());
    for (std::size_t i = 0; i < cfg.zones.size(); ++i) {
        EXPECT_EQ(back.zones[i].name, cfg.zones[i].name);
        EXPECT_EQ(back.zones[i].kind, cfg.zones[i].kind);
        EXPECT_EQ(back.zones[i].polygon, cfg.zones[i].polygon);
    }
    ASSERT_TRUE(back.camera.has_value());
    EXPECT_EQ(back.camera->camera_height_m, 3.0);
}

TEST(Config, MalformedJsonIsConfigError) {
    EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"zones": 3})")), ConfigError);
    EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(
                     R"({"zones":[{"name":"a","kind":"LAVA","polygon":[[0,0],[1,0],[1,1]]}]})")),
                 ConfigError);
}

TEST(Records, AlertLineFormat) {
    AlertEvent a{3, "yellow_line", TrainState::In, Severity::Critical, {{1, 2, 3, 4}, 0.5, 0}, 1.25};
    EXPECT_EQ(alert_jsonl(a),
              R"({"frame":3,"zone":"yellow_line","state":"IN","severity":"CRITICAL","box":[1.000000,2.000000,3.000000,4.000000],"score":0.500000,"height_m":1.250000})");
    EXPECT_EQ(transition_jsonl({9, TrainState::Off, TrainState::In}), R"({"frame":9,"from":"OFF","to":"IN"})");
}

}  // namespace
}  // namespace platguard
