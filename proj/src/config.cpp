#include "gslm/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gslm {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

struct Field {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    const uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad integer: " + s);
    return v;
}

int parse_int(const std::string& s) {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad integer: " + s);
    return v;
}

double parse_dbl(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("bad boolean: " + s);
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        auto u64 = [&](const char* n, uint64_t RunConfig::* m) {
            v.push_back({n, [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_u64(s); }});
        };
        auto i32 = [&](const char* n, int RunConfig::* m) {
            v.push_back({n, [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_int(s); }});
        };
        auto dbl = [&](const char* n, double RunConfig::* m) {
            v.push_back({n, [m](const RunConfig& c) { return format_double(c.*m); },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_dbl(s); }});
        };
        auto bol = [&](const char* n, bool RunConfig::* m) {
            v.push_back({n, [m](const RunConfig& c) { return c.*m ? "true" : "false"; },
                         [m](RunConfig& c, const std::string& s) { c.*m = parse_bool(s); }});
        };
        auto str = [&](const char* n, std::string RunConfig::* m) {
            v.push_back({n, [m](const RunConfig& c) { return c.*m; },
                         [m](RunConfig& c, const std::string& s) { c.*m = s; }});
        };
        u64("seed", &RunConfig::seed);
        i32("threads", &RunConfig::threads);
        str("data_dir", &RunConfig::data_dir);
        str("out_dir", &RunConfig::out_dir);
        i32("image_size", &RunConfig::image_size);
        i32("classes", &RunConfig::classes);
        i32("n_train", &RunConfig::n_train);
        i32("n_eval", &RunConfig::n_eval);
        dbl("noise_amplitude", &RunConfig::noise_amplitude);
        dbl("glm_lr", &RunConfig::glm_lr);
        dbl("slm_lr", &RunConfig::slm_lr);
        i32("batch_size", &RunConfig::batch_size);
        i32("epochs", &RunConfig::epochs);
        dbl("poly_power", &RunConfig::poly_power);
        dbl("weight_decay", &RunConfig::weight_decay);
        dbl("momentum", &RunConfig::momentum);
        dbl("backbone_lr_scale", &RunConfig::backbone_lr_scale);
        dbl("alpha", &RunConfig::alpha);
        dbl("k", &RunConfig::k);
        dbl("theta_fg", &RunConfig::theta_fg);
        dbl("theta_bg", &RunConfig::theta_bg);
        i32("slm_iterations", &RunConfig::slm_iterations);
        bol("boundary_constraint", &RunConfig::boundary_constraint);
        bol("seed_reactivation", &RunConfig::seed_reactivation);
        bol("coarse_generation", &RunConfig::coarse_generation);
        i32("crf_iterations", &RunConfig::crf_iterations);
        dbl("crf_spatial_weight", &RunConfig::crf_spatial_weight);
        dbl("crf_spatial_bandwidth", &RunConfig::crf_spatial_bandwidth);
        dbl("crf_bilateral_weight", &RunConfig::crf_bilateral_weight);
        dbl("crf_bilateral_bandwidth", &RunConfig::crf_bilateral_bandwidth);
        dbl("crf_color_bandwidth", &RunConfig::crf_color_bandwidth);
        dbl("bg_threshold", &RunConfig::bg_threshold);
        dbl("divergence_loss_limit", &RunConfig::divergence_loss_limit);
        return v;
    }();
    return f;
}

}  // namespace

void RunConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (slm_iterations < 0) throw std::invalid_argument("config: slm_iterations must be >= 0");
    if (glm_lr < 0.0 || slm_lr < 0.0) throw std::invalid_argument("config: negative learning rate");
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
    if (!(k > 0.0)) throw std::invalid_argument("config: k must be positive");
    if (!(theta_bg >= 0.0 && theta_bg < theta_fg && theta_fg <= 1.0))
        throw std::invalid_argument("config: need 0 <= theta_bg < theta_fg <= 1");
    if (!(bg_threshold > 0.0 && bg_threshold < 1.0))
        throw std::invalid_argument("config: bg_threshold must be in (0,1)");
}

std::map<std::string, std::string> config_to_map(const RunConfig& c) {
    std::map<std::string, std::string> m;
    for (const Field& f : fields()) m[f.name] = f.get(c);
    return m;
}

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    for (const Field& f : fields())
        if (f.name == key) {
            f.set(c, value);
            return;
        }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path.string() + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        apply_config_entry(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

std::string config_snapshot(const RunConfig& c) {
    std::ostringstream os;
    for (const auto& [k, v] : config_to_map(c)) os << k << "=" << v << "\n";
    return os.str();
}

RunConfig parse_snapshot(const std::filesystem::path& path) {
    return parse_config_file(path, RunConfig{});
}

}  // namespace gslm
