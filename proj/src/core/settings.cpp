#include "core/settings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

#include "core/errors.hpp"
#include "core/formats.hpp"

namespace subpeak {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::string& section, const std::string& key)
{
    return section.empty() ? key : "[" + section + "] " + key;
}

double parse_double(const std::string& section, const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError(where(section, key) + ": expected a number, got '" + v + "'");
    }
    return out;
}

long long parse_int(const std::string& section, const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError(where(section, key) + ": expected an integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& section, const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError(where(section, key) + ": expected an unsigned integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& v)
{
    if (v == "true" || v == "on" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "off" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError(where(section, key) + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

using Setter = std::function<void(const std::string& section, const std::string& key, const std::string& value)>;

void apply(const KeyValueConfig& kv, const std::string& section, const std::map<std::string, Setter>& setters)
{
    if (!kv.has_section(section)) {
        return;
    }
    for (const auto& [key, value] : kv.section(section)) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("unknown key " + where(section, key));
        }
        try {
            it->second(section, key, value);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(where(section, key) + ": " + e.what());
        }
    }
}

int to_int(const std::string& s, const std::string& k, const std::string& v)
{
    const long long x = parse_int(s, k, v);
    if (x < -2147483647LL || x > 2147483647LL) {
        throw ConfigError(where(s, k) + ": value out of range");
    }
    return static_cast<int>(x);
}

MotionModel parse_motion(const std::string& s, const std::string& k, const std::string& v)
{
    if (v == "linear") {
        return MotionModel::linear;
    }
    if (v == "sinusoidal") {
        return MotionModel::sinusoidal;
    }
    if (v == "random_walk") {
        return MotionModel::random_walk;
    }
    throw ConfigError(where(s, k) + ": unknown motion model '" + v + "'");
}

const char* motion_name(MotionModel m)
{
    switch (m) {
    case MotionModel::linear:
        return "linear";
    case MotionModel::sinusoidal:
        return "sinusoidal";
    case MotionModel::random_walk:
        return "random_walk";
    }
    return "linear";
}

const char* domain_name(BrtDomain d)
{
    switch (d) {
    case BrtDomain::features:
        return "features";
    case BrtDomain::response:
        return "response";
    case BrtDomain::both:
        return "both";
    }
    return "features";
}

}  // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& default_section)
{
    KeyValueConfig cfg;
    std::string section = default_section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        }
        auto& sec = cfg.sections_[section];
        if (sec.count(key) != 0) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + where(section, key));
        }
        sec[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path, const std::string& default_section)
{
    return parse(read_text(path), default_section);
}

const std::map<std::string, std::string>& KeyValueConfig::section(const std::string& section) const
{
    static const std::map<std::string, std::string> empty;
    const auto it = sections_.find(section);
    return it == sections_.end() ? empty : it->second;
}

std::vector<std::string> KeyValueConfig::section_names() const
{
    std::vector<std::string> out;
    for (const auto& [name, _] : sections_) {
        out.push_back(name);
    }
    return out;
}

void KeyValueConfig::set(const std::string& section, const std::string& key, const std::string& value)
{
    sections_[section][key] = value;
}

SceneConfig scene_from_config(const KeyValueConfig& kv, SceneConfig c)
{
    Occlusion occ = c.occlusion.value_or(Occlusion{});
    bool occ_set = c.occlusion.has_value();
    const std::map<std::string, Setter> setters{
        {"frames", [&](auto& s, auto& k, auto& v) { c.frames = to_int(s, k, v); }},
        {"map_h", [&](auto& s, auto& k, auto& v) { c.map_h = to_int(s, k, v); }},
        {"map_w", [&](auto& s, auto& k, auto& v) { c.map_w = to_int(s, k, v); }},
        {"channels", [&](auto& s, auto& k, auto& v) { c.channels = to_int(s, k, v); }},
        {"n_distractors", [&](auto& s, auto& k, auto& v) { c.n_distractors = to_int(s, k, v); }},
        {"target_h", [&](auto& s, auto& k, auto& v) { c.target_h = parse_double(s, k, v); }},
        {"target_w", [&](auto& s, auto& k, auto& v) { c.target_w = parse_double(s, k, v); }},
        {"motion", [&](auto& s, auto& k, auto& v) { c.motion = parse_motion(s, k, v); }},
        {"speed", [&](auto& s, auto& k, auto& v) { c.speed = parse_double(s, k, v); }},
        {"distractor_speed", [&](auto& s, auto& k, auto& v) { c.distractor_speed = parse_double(s, k, v); }},
        {"distractor_similarity", [&](auto& s, auto& k, auto& v) { c.distractor_similarity = parse_double(s, k, v); }},
        {"occlusion_start", [&](auto& s, auto& k, auto& v) { occ.start_frame = to_int(s, k, v); occ_set = true; }},
        {"occlusion_duration", [&](auto& s, auto& k, auto& v) { occ.duration = to_int(s, k, v); occ_set = true; }},
        {"occlusion_coverage", [&](auto& s, auto& k, auto& v) { occ.coverage = parse_double(s, k, v); occ_set = true; }},
        {"scale_drift", [&](auto& s, auto& k, auto& v) { c.scale_drift = parse_double(s, k, v); }},
        {"noise_sigma", [&](auto& s, auto& k, auto& v) { c.noise_sigma = parse_double(s, k, v); }},
        {"seed", [&](auto& s, auto& k, auto& v) { c.seed = parse_u64(s, k, v); }},
        {"scales",
         [&](auto& s, auto& k, auto& v) {
             ScaleSpec spec;
             spec.scales.clear();
             for (const auto& item : split_list(v)) {
                 const auto colon = item.find(':');
                 if (colon == std::string::npos) {
                     throw ConfigError(where(s, k) + ": expected name:factor entries");
                 }
                 spec.scales.push_back({trim(item.substr(0, colon)), to_int(s, k, trim(item.substr(colon + 1)))});
             }
             c.scales = spec;
         }},
    };
    apply(kv, "scene", setters);
    if (occ_set) {
        c.occlusion = occ;
    }
    try {
        c.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[scene]: ") + e.what());
    }
    return c;
}

TrackerConfig tracker_from_config(const KeyValueConfig& kv, TrackerConfig c)
{
    const std::map<std::string, Setter> tracker{
        {"prp", [&](auto& s, auto& k, auto& v) { c.prp_on = parse_bool(s, k, v); }},
        {"brt", [&](auto& s, auto& k, auto& v) { c.brt_on = parse_bool(s, k, v); }},
        {"multiscale", [&](auto& s, auto& k, auto& v) { c.multiscale_on = parse_bool(s, k, v); }},
        {"brt_ratio", [&](auto& s, auto& k, auto& v) { c.brt_ratio = parse_double(s, k, v); }},
        {"brt_domain",
         [&](auto& s, auto& k, auto& v) {
             if (v == "features") {
                 c.brt_domain = BrtDomain::features;
             } else if (v == "response") {
                 c.brt_domain = BrtDomain::response;
             } else if (v == "both") {
                 c.brt_domain = BrtDomain::both;
             } else {
                 throw ConfigError(where(s, k) + ": expected features, response or both");
             }
         }},
        {"rectify_after_fusion", [&](auto& s, auto& k, auto& v) { c.rectify_after_fusion = parse_bool(s, k, v); }},
        {"fusion_betas",
         [&](auto& s, auto& k, auto& v) {
             c.fusion_betas.clear();
             for (const auto& item : split_list(v)) {
                 c.fusion_betas.push_back(parse_double(s, k, item));
             }
         }},
        {"update_interval", [&](auto& s, auto& k, auto& v) { c.update_interval = to_int(s, k, v); }},
        {"sigma_factor", [&](auto& s, auto& k, auto& v) { c.sigma_factor = parse_double(s, k, v); }},
        {"subpeak_threshold", [&](auto& s, auto& k, auto& v) { c.subpeak_threshold = parse_double(s, k, v); }},
        {"mid_channels", [&](auto& s, auto& k, auto& v) { c.mid_channels = to_int(s, k, v); }},
        {"kernel1", [&](auto& s, auto& k, auto& v) { c.kernel1 = to_int(s, k, v); }},
        {"kernel2", [&](auto& s, auto& k, auto& v) { c.kernel2 = to_int(s, k, v); }},
        {"lambda1", [&](auto& s, auto& k, auto& v) { c.lambda1 = parse_double(s, k, v); }},
        {"lambda2", [&](auto& s, auto& k, auto& v) { c.lambda2 = parse_double(s, k, v); }},
        {"hidden",
         [&](auto& s, auto& k, auto& v) {
             if (v == "leaky_relu") {
                 c.hidden = HiddenActivation::leaky_relu;
             } else if (v == "identity") {
                 c.hidden = HiddenActivation::identity;
             } else {
                 throw ConfigError(where(s, k) + ": expected leaky_relu or identity");
             }
         }},
        {"memory_capacity", [&](auto& s, auto& k, auto& v) { c.memory_capacity = to_int(s, k, v); }},
        {"memory_decay", [&](auto& s, auto& k, auto& v) { c.memory_decay = parse_double(s, k, v); }},
        {"seed", [&](auto& s, auto& k, auto& v) { c.seed = parse_u64(s, k, v); }},
    };
    const auto both = [&](auto member, auto parse) {
        return [&c, member, parse](auto& s, auto& k, auto& v) {
            const auto x = parse(s, k, v);
            c.init_optimizer.*member = x;
            c.update_optimizer.*member = x;
        };
    };
    const std::map<std::string, Setter> optimizer{
        {"init_iters", [&](auto& s, auto& k, auto& v) { c.init_optimizer.max_outer_iters = to_int(s, k, v); }},
        {"update_iters", [&](auto& s, auto& k, auto& v) { c.update_optimizer.max_outer_iters = to_int(s, k, v); }},
        {"variant",
         [&](auto& s, auto& k, auto& v) {
             CgVariant var{};
             if (v == "polak_ribiere_plus") {
                 var = CgVariant::polak_ribiere_plus;
             } else if (v == "fletcher_reeves") {
                 var = CgVariant::fletcher_reeves;
             } else {
                 throw ConfigError(where(s, k) + ": expected polak_ribiere_plus or fletcher_reeves");
             }
             c.init_optimizer.variant = var;
             c.update_optimizer.variant = var;
         }},
        {"initial_step", both(&OptimizerConfig::initial_step, parse_double)},
        {"shrink", both(&OptimizerConfig::shrink, parse_double)},
        {"sufficient_decrease", both(&OptimizerConfig::sufficient_decrease, parse_double)},
        {"curvature", both(&OptimizerConfig::curvature, parse_double)},
        {"max_backtracks", both(&OptimizerConfig::max_backtracks, to_int)},
        {"grad_tolerance", both(&OptimizerConfig::grad_tolerance, parse_double)},
    };
    apply(kv, "tracker", tracker);
    apply(kv, "optimizer", optimizer);
    try {
        c.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[tracker]: ") + e.what());
    }
    return c;
}

void RunConfig::validate() const
{
    if (repeats < 1) {
        throw ConfigError("[run] repeats must be at least 1");
    }
    scene.validate();
    tracker.validate();
}

RunConfig run_from_config(const KeyValueConfig& kv)
{
    for (const auto& name : kv.section_names()) {
        if (name != "run" && name != "scene" && name != "tracker" && name != "optimizer") {
            throw ConfigError("unknown section [" + name + "]");
        }
    }
    RunConfig r;
    r.scene = scene_from_config(kv);
    r.tracker = tracker_from_config(kv);
    const std::map<std::string, Setter> run{
        {"repeats", [&](auto& s, auto& k, auto& v) { r.repeats = to_int(s, k, v); }},
        {"base_seed", [&](auto& s, auto& k, auto& v) { r.base_seed = parse_u64(s, k, v); }},
        {"output_dir", [&](auto&, auto&, auto& v) { r.output_dir = v; }},
    };
    apply(kv, "run", run);
    r.validate();
    return r;
}

namespace {

void reject_foreign_sections(const KeyValueConfig& kv, std::initializer_list<const char*> allowed)
{
    for (const auto& name : kv.section_names()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return name == a; })) {
            throw ConfigError("unknown section [" + name + "]");
        }
    }
}

}  // namespace

SceneConfig load_scene_config(const std::filesystem::path& path)
{
    const auto kv = KeyValueConfig::load(path, "scene");
    reject_foreign_sections(kv, {"scene"});
    return scene_from_config(kv);
}

TrackerConfig load_tracker_config(const std::filesystem::path& path)
{
    const auto kv = KeyValueConfig::load(path, "tracker");
    reject_foreign_sections(kv, {"tracker", "optimizer"});
    return tracker_from_config(kv);
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    return run_from_config(KeyValueConfig::load(path, "run"));
}

std::string to_config_text(const SceneConfig& c)
{
    std::ostringstream out;
    out << "[scene]\n";
    out << "frames = " << c.frames << "\n";
    out << "map_h = " << c.map_h << "\n";
    out << "map_w = " << c.map_w << "\n";
    out << "channels = " << c.channels << "\n";
    out << "n_distractors = " << c.n_distractors << "\n";
    out << "target_h = " << format_double(c.target_h) << "\n";
    out << "target_w = " << format_double(c.target_w) << "\n";
    out << "motion = " << motion_name(c.motion) << "\n";
    out << "speed = " << format_double(c.speed) << "\n";
    out << "distractor_speed = " << format_double(c.distractor_speed) << "\n";
    out << "distractor_similarity = " << format_double(c.distractor_similarity) << "\n";
    if (c.occlusion) {
        out << "occlusion_start = " << c.occlusion->start_frame << "\n";
        out << "occlusion_duration = " << c.occlusion->duration << "\n";
        out << "occlusion_coverage = " << format_double(c.occlusion->coverage) << "\n";
    }
    out << "scale_drift = " << format_double(c.scale_drift) << "\n";
    out << "noise_sigma = " << format_double(c.noise_sigma) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "scales = ";
    for (std::size_t i = 0; i < c.scales.scales.size(); ++i) {
        out << (i ? ", " : "") << c.scales.scales[i].name << ":" << c.scales.scales[i].factor;
    }
    out << "\n";
    return out.str();
}

std::string to_config_text(const TrackerConfig& c)
{
    std::ostringstream out;
    out << "[tracker]\n";
    out << "prp = " << (c.prp_on ? "true" : "false") << "\n";
    out << "brt = " << (c.brt_on ? "true" : "false") << "\n";
    out << "multiscale = " << (c.multiscale_on ? "true" : "false") << "\n";
    out << "brt_ratio = " << format_double(c.brt_ratio) << "\n";
    out << "brt_domain = " << domain_name(c.brt_domain) << "\n";
    out << "rectify_after_fusion = " << (c.rectify_after_fusion ? "true" : "false") << "\n";
    if (!c.fusion_betas.empty()) {
        out << "fusion_betas = ";
        for (std::size_t i = 0; i < c.fusion_betas.size(); ++i) {
            out << (i ? ", " : "") << format_double(c.fusion_betas[i]);
        }
        out << "\n";
    }
    out << "update_interval = " << c.update_interval << "\n";
    out << "sigma_factor = " << format_double(c.sigma_factor) << "\n";
    out << "subpeak_threshold = " << format_double(c.subpeak_threshold) << "\n";
    out << "mid_channels = " << c.mid_channels << "\n";
    out << "kernel1 = " << c.kernel1 << "\n";
    out << "kernel2 = " << c.kernel2 << "\n";
    out << "lambda1 = " << format_double(c.lambda1) << "\n";
    out << "lambda2 = " << format_double(c.lambda2) << "\n";
    out << "hidden = " << (c.hidden == HiddenActivation::identity ? "identity" : "leaky_relu") << "\n";
    out << "memory_capacity = " << c.memory_capacity << "\n";
    out << "memory_decay = " << format_double(c.memory_decay) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "\n[optimizer]\n";
    out << "init_iters = " << c.init_optimizer.max_outer_iters << "\n";
    out << "update_iters = " << c.update_optimizer.max_outer_iters << "\n";
    out << "variant = "
        << (c.init_optimizer.variant == CgVariant::fletcher_reeves ? "fletcher_reeves" : "polak_ribiere_plus") << "\n";
    out << "initial_step = " << format_double(c.init_optimizer.initial_step) << "\n";
    out << "shrink = " << format_double(c.init_optimizer.shrink) << "\n";
    out << "sufficient_decrease = " << format_double(c.init_optimizer.sufficient_decrease) << "\n";
    out << "curvature = " << format_double(c.init_optimizer.curvature) << "\n";
    out << "max_backtracks = " << c.init_optimizer.max_backtracks << "\n";
    out << "grad_tolerance = " << format_double(c.init_optimizer.grad_tolerance) << "\n";
    return out.str();
}

}  // namespace subpeak
