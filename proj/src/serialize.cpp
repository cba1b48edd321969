#include "diffid/serialize.hpp"

#include "diffid/error.hpp"

namespace diffid {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(json& j, const SyntheticWorldConfig& c) {
    j = json{{"d_id", c.d_id},
             {"d_att", c.d_att},
             {"image_size", c.image_size},
             {"entanglement", c.entanglement},
             {"encoder_noise", c.encoder_noise},
             {"generator_leakage", c.generator_leakage},
             {"generator_blur", c.generator_blur},
             {"seed", c.seed},
             {"attribute_spread", c.attribute_spread},
             {"yaw_range_deg", c.yaw_range_deg},
             {"yaw_occlusion", c.yaw_occlusion},
             {"clutter", c.clutter},
             {"detail_spread", c.detail_spread},
             {"encoder_bleed", c.encoder_bleed},
             {"occlusion_noise", c.occlusion_noise},
             {"feature_gain", c.feature_gain},
             {"mask_dilation_px", c.mask_dilation_px}};
}

// Missing keys keep their defaults so hand-written configs can be partial.
void from_json(const json& j, SyntheticWorldConfig& c) {
    if (!j.is_object()) throw InvalidArgument("world config must be a JSON object");
    read_opt(j, "d_id", c.d_id);
    read_opt(j, "d_att", c.d_att);
    read_opt(j, "image_size", c.image_size);
    read_opt(j, "entanglement", c.entanglement);
    read_opt(j, "encoder_noise", c.encoder_noise);
    read_opt(j, "generator_leakage", c.generator_leakage);
    read_opt(j, "generator_blur", c.generator_blur);
    read_opt(j, "seed", c.seed);
    read_opt(j, "attribute_spread", c.attribute_spread);
    read_opt(j, "yaw_range_deg", c.yaw_range_deg);
    read_opt(j, "yaw_occlusion", c.yaw_occlusion);
    read_opt(j, "clutter", c.clutter);
    read_opt(j, "detail_spread", c.detail_spread);
    read_opt(j, "encoder_bleed", c.encoder_bleed);
    read_opt(j, "occlusion_noise", c.occlusion_noise);
    read_opt(j, "feature_gain", c.feature_gain);
    read_opt(j, "mask_dilation_px", c.mask_dilation_px);
    c.validate();
}

void to_json(json& j, const CorpusSpec& s) {
    j = json{{"identities", s.identities},         {"reference_pool", s.reference_pool},
             {"real_tests", s.real_tests},         {"fake_tests", s.fake_tests},
             {"frames_per_video", s.frames_per_video}, {"delta_fake", s.delta_fake},
             {"frame_jitter", s.frame_jitter},     {"yaw_jitter_deg", s.yaw_jitter_deg}};
}

void from_json(const json& j, CorpusSpec& s) {
    read_opt(j, "identities", s.identities);
    read_opt(j, "reference_pool", s.reference_pool);
    read_opt(j, "real_tests", s.real_tests);
    read_opt(j, "fake_tests", s.fake_tests);
    read_opt(j, "frames_per_video", s.frames_per_video);
    read_opt(j, "delta_fake", s.delta_fake);
    read_opt(j, "frame_jitter", s.frame_jitter);
    read_opt(j, "yaw_jitter_deg", s.yaw_jitter_deg);
    s.validate();
}

void to_json(json& j, const ManifestEntry& e) {
    j = json{{"entry_id", e.entry_id},
             {"identity", e.identity},
             {"role", to_string(e.role)},
             {"label", to_string(e.label)},
             {"video_id", e.video_id},
             {"frame_index", e.frame_index},
             {"yaw", e.yaw}};
    if (const auto* src = std::get_if<SyntheticSource>(&e.source)) {
        j["synthetic"] = json{{"identity_index", src->identity_index},
                              {"attributes", src->attributes},
                              {"delta", src->delta},
                              {"sample_seed", src->sample_seed}};
    } else {
        j["path"] = std::get<std::filesystem::path>(e.source).generic_string();
    }
    if (!e.image_path.empty()) j["image_path"] = e.image_path.generic_string();
}

void from_json(const json& j, ManifestEntry& e) {
    j.at("entry_id").get_to(e.entry_id);
    j.at("identity").get_to(e.identity);
    e.role = parse_role(j.at("role").get<std::string>());
    e.label = parse_label(j.at("label").get<std::string>());
    e.video_id = j.value("video_id", e.entry_id);
    e.frame_index = j.value("frame_index", 0);
    e.yaw = j.value("yaw", 0.0);
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        SyntheticSource src;
        s.at("identity_index").get_to(src.identity_index);
        s.at("attributes").get_to(src.attributes);
        s.at("delta").get_to(src.delta);
        s.at("sample_seed").get_to(src.sample_seed);
        e.source = std::move(src);
    } else if (j.contains("path")) {
        e.source = std::filesystem::path(j.at("path").get<std::string>());
    } else {
        throw InvalidArgument("manifest entry " + e.entry_id + " has neither a path nor a synthetic source");
    }
    if (j.contains("image_path")) e.image_path = j.at("image_path").get<std::string>();
}

void to_json(json& j, const DistanceTriple& t) {
    j = json{{"space", to_string(t.space)}, {"l_recon", t.l_recon}, {"l_recon_id", t.l_recon_id}, {"l_id", t.l_id}};
}

void to_json(json& j, const DiffIdScore& s) {
    j = json{{"value", s.value},           {"ratio_ref", s.ratio_ref}, {"ratio_test", s.ratio_test},
             {"theta_ref", s.theta_ref},   {"theta_test", s.theta_test}, {"ref", s.ref},
             {"test", s.test}};
}

void to_json(json& j, const DetectOptions& o) {
    j = json{{"threshold", o.threshold}, {"eps", o.eps}, {"use_mask", o.use_mask}, {"gain", o.gain}};
}

void from_json(const json& j, DetectOptions& o) {
    read_opt(j, "threshold", o.threshold);
    read_opt(j, "eps", o.eps);
    read_opt(j, "use_mask", o.use_mask);
    read_opt(j, "gain", o.gain);
}

void to_json(json& j, const EvalConfig& c) {
    j = json{{"strategy", to_string(c.strategy)},
             {"level", to_string(c.level)},
             {"score", to_string(c.score)},
             {"seed", c.seed},
             {"max_frames_per_video", c.max_frames_per_video},
             {"detect", c.detect}};
    j["jpeg_qf"] = c.jpeg_qf ? json(*c.jpeg_qf) : json(nullptr);
    j["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
}

void from_json(const json& j, EvalConfig& c) {
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("level")) c.level = j.at("level").get<std::string>() == "video" ? Level::Video : Level::Frame;
    if (j.contains("score")) c.score = parse_score_kind(j.at("score").get<std::string>());
    read_opt(j, "seed", c.seed);
    read_opt(j, "max_frames_per_video", c.max_frames_per_video);
    if (j.contains("detect")) j.at("detect").get_to(c.detect);
    if (j.contains("jpeg_qf") && !j.at("jpeg_qf").is_null()) c.jpeg_qf = j.at("jpeg_qf").get<int>();
    if (j.contains("threshold") && !j.at("threshold").is_null()) c.threshold = j.at("threshold").get<double>();
}

void to_json(json& j, const EntryOutcome& o) {
    j = json{{"entry_id", o.entry_id}, {"identity", o.identity},     {"video_id", o.video_id},
             {"label", o.fake ? "fake" : "real"}, {"reference_id", o.reference_id}, {"ok", o.ok}};
    if (o.ok) {
        j["score"] = o.score;
        j["iesim"] = o.iesim;
    } else {
        j["error"] = o.error;
    }
}

void to_json(json& j, const EvalReport& r) {
    j = json{{"auc", r.auc},
             {"degenerate", r.degenerate},
             {"per_identity_auc", r.per_identity_auc},
             {"real_scores", r.real_scores},
             {"fake_scores", r.fake_scores},
             {"failures", r.failures},
             {"failure_messages", r.failure_messages},
             {"config_fingerprint", r.fingerprint},
             {"config", r.config}};
    j["threshold"] = r.threshold ? json(*r.threshold) : json(nullptr);
    j["balanced_accuracy"] = r.balanced_accuracy ? json(*r.balanced_accuracy) : json(nullptr);
    json units = json::array();
    for (const auto& u : r.units) {
        units.push_back(json{{"id", u.id}, {"identity", u.identity}, {"label", u.fake ? "fake" : "real"},
                             {"score", u.score}});
    }
    j["units"] = std::move(units);
}

void to_json(json& j, const Calibration& c) {
    j = json{{"threshold", c.threshold}, {"real_q95", c.real_q95}, {"fake_q05", c.fake_q05}};
}

json detection_record(const DetectionResult& r) {
    return json{{"score", r.score},
                {"iesim", r.iesim},
                {"verdict", r.fake ? "fake" : "real"},
                {"threshold", r.threshold},
                {"yaw_ref", r.yaw_ref},
                {"yaw_test", r.yaw_test},
                {"id_ref", r.quad.id_ref.values},
                {"id_test", r.quad.id_test.values},
                {"att_ref", r.quad.att_ref.values},
                {"att_test", r.quad.att_test.values}};
}

}  // namespace diffid
