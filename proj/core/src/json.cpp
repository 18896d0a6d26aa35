#include "dropkit/json.hpp"

#include <cstdio>

#include "dropkit/error.hpp"

namespace dropkit {

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const ModelSpec& s) {
    j = {{"kind", to_string(s.kind)},           {"input_dim", s.input_dim},
         {"output_dim", s.output_dim},          {"hidden_dim", s.hidden_dim},
         {"activation", to_string(s.activation)}, {"l2_reg", s.l2_reg},
         {"bias", s.bias}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
    try {
        if (j.contains("kind")) s.kind = parse_model_kind(j.at("kind").get<std::string>());
        if (j.contains("activation")) {
            s.activation = parse_activation(j.at("activation").get<std::string>());
        }
        read_if(j, "input_dim", s.input_dim);
        read_if(j, "output_dim", s.output_dim);
        read_if(j, "hidden_dim", s.hidden_dim);
        read_if(j, "l2_reg", s.l2_reg);
        read_if(j, "bias", s.bias);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model spec: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    nlohmann::json schedule = nlohmann::json::array();
    for (const auto& step : c.lr_schedule) {
        schedule.push_back({{"epoch_start", step.epoch_start}, {"learning_rate", step.learning_rate}});
    }
    j = {{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"lr_schedule", schedule},
         {"momentum", c.momentum},
         {"weight_decay", c.weight_decay},
         {"seed", c.seed},
         {"init", to_string(c.init)},
         {"shuffle", c.shuffle}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    try {
        read_if(j, "epochs", c.epochs);
        read_if(j, "batch_size", c.batch_size);
        read_if(j, "momentum", c.momentum);
        read_if(j, "weight_decay", c.weight_decay);
        read_if(j, "seed", c.seed);
        read_if(j, "shuffle", c.shuffle);
        if (j.contains("init")) c.init = parse_init_scheme(j.at("init").get<std::string>());
        if (j.contains("lr_schedule")) {
            c.lr_schedule.clear();
            for (const auto& step : j.at("lr_schedule")) {
                c.lr_schedule.push_back(
                    {step.at("epoch_start").get<std::size_t>(), step.at("learning_rate").get<double>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid training config: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const IhvpConfig& c) {
    j = {{"method", to_string(c.method)},
         {"damping", c.damping},
         {"cg_tol", c.cg_tol},
         {"cg_max_iter", c.cg_max_iter},
         {"lissa_depth", c.lissa_depth},
         {"lissa_scale", c.lissa_scale},
         {"lissa_repeats", c.lissa_repeats},
         {"lissa_batch", c.lissa_batch},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, IhvpConfig& c) {
    try {
        if (j.contains("method")) c.method = parse_ihvp_method(j.at("method").get<std::string>());
        read_if(j, "damping", c.damping);
        read_if(j, "cg_tol", c.cg_tol);
        read_if(j, "cg_max_iter", c.cg_max_iter);
        read_if(j, "lissa_depth", c.lissa_depth);
        read_if(j, "lissa_scale", c.lissa_scale);
        read_if(j, "lissa_repeats", c.lissa_repeats);
        read_if(j, "lissa_batch", c.lissa_batch);
        read_if(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid solver config: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const Metrics& m) {
    j = {{"mean_loss", m.mean_loss}, {"n_evaluated", m.n_evaluated}};
    if (m.accuracy) j["accuracy"] = *m.accuracy;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t parse_hex64(const std::string& text) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(text, &used, 16);
    } catch (const std::exception&) {
        throw ConfigError("invalid hex value '" + text + "'");
    }
    if (used != text.size()) throw ConfigError("invalid hex value '" + text + "'");
    return v;
}

}  // namespace dropkit
