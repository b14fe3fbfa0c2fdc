#include "lesen/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace lesen {

namespace {

struct Key {
    std::string name;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad numeric value: " + s);
    return v;
}

long long parse_int(const std::string& s) {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad integer value: " + s);
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("bad boolean value: " + s);
}

#define KEY_STR(name, field)                                              \
    {name, [](const TrainConfig& c) { return c.field; },                  \
     [](TrainConfig& c, const std::string& v) { c.field = v; }}
#define KEY_DOUBLE(name, field)                                           \
    {name, [](const TrainConfig& c) { return fmt_double(c.field); },      \
     [](TrainConfig& c, const std::string& v) { c.field = parse_double(v); }}
#define KEY_INT(name, field)                                              \
    {name, [](const TrainConfig& c) { return std::to_string(c.field); },  \
     [](TrainConfig& c, const std::string& v) { c.field = static_cast<int>(parse_int(v)); }}
#define KEY_U64(name, field)                                              \
    {name, [](const TrainConfig& c) { return std::to_string(c.field); },  \
     [](TrainConfig& c, const std::string& v) {                           \
         c.field = static_cast<std::uint64_t>(parse_int(v));              \
     }}
#define KEY_BOOL(name, field)                                                   \
    {name, [](const TrainConfig& c) { return c.field ? "true" : "false"; },     \
     [](TrainConfig& c, const std::string& v) { c.field = parse_bool(v); }}

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        KEY_STR("data.path", dataset_path),
        KEY_STR("data.split_path", split_path),
        KEY_INT("data.height", data.image_height),
        KEY_INT("data.width", data.image_width),
        KEY_INT("data.n_samples", data.n_samples),
        KEY_DOUBLE("data.tube_width_min", data.tube_width_min),
        KEY_DOUBLE("data.tube_width_max", data.tube_width_max),
        KEY_DOUBLE("data.contrast_a", data.contrast_a),
        KEY_DOUBLE("data.contrast_b", data.contrast_b),
        KEY_DOUBLE("data.noise_sigma_a", data.noise_sigma_a),
        KEY_DOUBLE("data.noise_sigma_b", data.noise_sigma_b),
        KEY_U64("data.seed", data.seed),
        KEY_INT("split.n_labeled", n_labeled),
        KEY_INT("split.n_unlabeled", n_unlabeled),
        KEY_INT("split.n_test", n_test),
        KEY_U64("split.seed", split_seed),
        KEY_DOUBLE("aug.noise_sigma", aug.noise_sigma),
        KEY_DOUBLE("aug.gamma_min", aug.gamma_min),
        KEY_DOUBLE("aug.gamma_max", aug.gamma_max),
        KEY_DOUBLE("aug.brightness_delta", aug.brightness_delta),
        KEY_INT("aug.m_copies", aug.m_copies),
        KEY_INT("net.base_width", net.base_width),
        KEY_INT("net.depth", net.depth),
        KEY_INT("net.n_classes", net.n_classes),
        KEY_BOOL("net.use_spatial_attention", net.use_spatial_attention),
        KEY_DOUBLE("loss.alpha_sup", loss.alpha_sup),
        KEY_DOUBLE("loss.lambda_max", loss.lambda_max),
        KEY_INT("loss.rampup_epochs", loss.rampup_epochs),
        KEY_DOUBLE("loss.dice_smooth", loss.dice_smooth),
        KEY_DOUBLE("ema.decay", ema.decay),
        KEY_DOUBLE("opt.learning_rate", opt.learning_rate),
        KEY_DOUBLE("opt.weight_decay", opt.weight_decay),
        KEY_INT("train.total_epochs", total_epochs),
        KEY_INT("train.labeled_batch", labeled_batch),
        KEY_INT("train.unlabeled_batch", unlabeled_batch),
        KEY_U64("train.init_seed", init_seed),
        KEY_U64("train.seed", train_seed),
        KEY_BOOL("train.use_russ", use_russ),
        KEY_BOOL("train.supervised_only", supervised_only),
        KEY_DOUBLE("train.labeled_noise_sigma", labeled_noise_sigma),
        KEY_INT("train.validation_count", validation_count),
        KEY_INT("train.checkpoint_interval", checkpoint_interval),
        KEY_INT("ablate.seeds", ablate_seeds),
        KEY_INT("ablate.jobs", ablate_jobs),
        KEY_STR("out.dir", out_dir),
    };
    return keys;
}

#undef KEY_STR
#undef KEY_DOUBLE
#undef KEY_INT
#undef KEY_U64
#undef KEY_BOOL

}  // namespace

void TrainConfig::validate() const {
    data.validate();
    aug.validate();
    net.validate();
    loss.validate();
    ema.validate();
    if (total_epochs < 1) throw std::invalid_argument("train.total_epochs must be >= 1");
    if (labeled_batch < 1 || unlabeled_batch < 1)
        throw std::invalid_argument("batch sizes must be >= 1");
    if (n_labeled < 0 || n_unlabeled < 0 || n_test < 0)
        throw std::invalid_argument("split counts must be >= 0");
    if (validation_count < 0 || validation_count >= n_labeled + 1)
        throw std::invalid_argument("train.validation_count must fit inside the labeled split");
    if (checkpoint_interval < 1)
        throw std::invalid_argument("train.checkpoint_interval must be >= 1");
    if (ablate_seeds < 1) throw std::invalid_argument("ablate.seeds must be >= 1");
    if (ablate_jobs < 1) throw std::invalid_argument("ablate.jobs must be >= 1");
}

void apply_override(TrainConfig& cfg, const std::string& key_value) {
    auto eq = key_value.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override must be key=value: " + key_value);
    const std::string key = key_value.substr(0, eq);
    const std::string value = key_value.substr(eq + 1);
    for (const auto& k : key_table())
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    throw std::invalid_argument("unknown config key: " + key);
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        try {
            apply_override(cfg, line.substr(start));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void write_resolved_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write resolved config: " + path);
    for (const auto& k : key_table()) out << k.name << "=" << k.get(cfg) << "\n";
}

}  // namespace lesen
