#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dispat/autodiff.hpp"
#include "dispat/config.hpp"
#include "dispat/detail/binio.hpp"
#include "dispat/model.hpp"
#include "dispat/optim.hpp"

namespace dispat {

/// On-disk model snapshot: "DSPT" magic, version, the config as JSON, the
/// step counter, every parameter as little-endian 32-bit floats sorted by
/// name, and optionally the Adam state. Values round-trip exactly at 32-bit
/// precision, so save -> load -> save is byte-identical.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    ModelConfig config;
    std::uint64_t step = 0;
    std::map<std::string, Tensor> params;

    bool has_optimizer = false;
    double opt_lr = 0.0, opt_beta1 = 0.0, opt_beta2 = 0.0, opt_eps = 0.0;
    std::uint64_t opt_t = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> opt_slots; // m, v
};

namespace detail {

inline void write_tensor_f32(std::ostream& os, const Tensor& t) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rows()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) write_f32(os, static_cast<float>(t.data()[i]));
}

inline Tensor read_tensor_f32(std::istream& is) {
    const std::uint32_t r = read_le<std::uint32_t>(is);
    const std::uint32_t c = read_le<std::uint32_t>(is);
    if (r > (1u << 20) || c > (1u << 20) || (r != 0) != (c != 0))
        throw FormatError("checkpoint: implausible tensor shape");
    Tensor t(static_cast<int>(r), static_cast<int>(c));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<double>(read_f32(is));
    return t;
}

} // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& cp) {
    os.write("DSPT", 4);
    detail::write_le<std::uint32_t>(os, Checkpoint::kVersion);
    detail::write_string(os, model_config_to_json(cp.config).dump());
    detail::write_le<std::uint64_t>(os, cp.step);

    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cp.params.size()));
    for (const auto& [name, t] : cp.params) { // std::map iterates sorted
        detail::write_string(os, name);
        detail::write_tensor_f32(os, t);
    }

    detail::write_le<std::uint8_t>(os, cp.has_optimizer ? 1 : 0);
    if (cp.has_optimizer) {
        detail::write_f64(os, cp.opt_lr);
        detail::write_f64(os, cp.opt_beta1);
        detail::write_f64(os, cp.opt_beta2);
        detail::write_f64(os, cp.opt_eps);
        detail::write_le<std::uint64_t>(os, cp.opt_t);
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cp.opt_slots.size()));
        for (const auto& [name, mv] : cp.opt_slots) {
            detail::write_string(os, name);
            detail::write_tensor_f32(os, mv.first);
            detail::write_tensor_f32(os, mv.second);
        }
    }
    if (!os) throw FormatError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
    detail::expect_magic(is, "DSPT", "checkpoint");
    const std::uint32_t version = detail::read_le<std::uint32_t>(is);
    if (version != Checkpoint::kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint cp;
    nlohmann::json cfg_json;
    try {
        cfg_json = nlohmann::json::parse(detail::read_string(is));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: bad config json: ") + e.what());
    }
    model_config_from_json(cp.config, cfg_json);
    cp.step = detail::read_le<std::uint64_t>(is);

    const std::uint32_t n_params = detail::read_le<std::uint32_t>(is);
    if (n_params > (1u << 20)) throw FormatError("checkpoint: implausible parameter count");
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = detail::read_string(is, 1u << 16);
        Tensor t = detail::read_tensor_f32(is);
        if (!cp.params.emplace(std::move(name), std::move(t)).second)
            throw FormatError("checkpoint: duplicate parameter name");
    }

    const std::uint8_t has_opt = detail::read_le<std::uint8_t>(is);
    if (has_opt > 1) throw FormatError("checkpoint: bad optimizer flag");
    cp.has_optimizer = has_opt == 1;
    if (cp.has_optimizer) {
        cp.opt_lr = detail::read_f64(is);
        cp.opt_beta1 = detail::read_f64(is);
        cp.opt_beta2 = detail::read_f64(is);
        cp.opt_eps = detail::read_f64(is);
        cp.opt_t = detail::read_le<std::uint64_t>(is);
        const std::uint32_t n_slots = detail::read_le<std::uint32_t>(is);
        if (n_slots > (1u << 20)) throw FormatError("checkpoint: implausible slot count");
        for (std::uint32_t i = 0; i < n_slots; ++i) {
            std::string name = detail::read_string(is, 1u << 16);
            Tensor m = detail::read_tensor_f32(is);
            Tensor v = detail::read_tensor_f32(is);
            if (!cp.opt_slots.emplace(std::move(name), std::make_pair(std::move(m), std::move(v))).second)
                throw FormatError("checkpoint: duplicate optimizer slot");
        }
    }
    return cp;
}

/// Snapshots the model (and optionally the optimizer) into a Checkpoint.
/// Values are rounded through f32 here already, so what apply_checkpoint
/// restores is exactly what a save/load cycle would produce.
inline Checkpoint make_checkpoint(const Model& model, Adam* opt = nullptr,
                                  std::uint64_t step = 0) {
    Checkpoint cp;
    cp.config = model.config();
    cp.step = step;
    for (const auto& p : model.params()) {
        Tensor t = p.value;
        for (std::size_t i = 0; i < t.size(); ++i)
            t.data()[i] = static_cast<double>(static_cast<float>(t.data()[i]));
        cp.params.emplace(p.name, std::move(t));
    }
    if (opt != nullptr) {
        cp.has_optimizer = true;
        cp.opt_lr = opt->lr();
        cp.opt_beta1 = opt->beta1();
        cp.opt_beta2 = opt->beta2();
        cp.opt_eps = opt->eps();
        cp.opt_t = static_cast<std::uint64_t>(opt->step_count());
        for (const auto& p : model.params()) {
            Adam::Slot& s = opt->slot_for(p);
            Tensor m = s.m, v = s.v;
            for (std::size_t i = 0; i < m.size(); ++i) {
                m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
                v.data()[i] = static_cast<double>(static_cast<float>(v.data()[i]));
            }
            cp.opt_slots.emplace(p.name, std::make_pair(std::move(m), std::move(v)));
        }
    }
    return cp;
}

/// Loads checkpoint values into an existing model. The architecture fields
/// of the stored config must match; parameter names and shapes must line up
/// exactly.
inline void apply_checkpoint(const Checkpoint& cp, Model& model, Adam* opt = nullptr) {
    const ModelConfig& a = cp.config;
    const ModelConfig& b = model.config();
    if (a.d_h != b.d_h || a.heads != b.heads || a.layers != b.layers || a.n_max != b.n_max ||
        a.max_level != b.max_level || a.gate_dim() != b.gate_dim() ||
        a.ffn_sublayer != b.ffn_sublayer)
        throw ConfigError("checkpoint: architecture mismatch with model config");

    if (cp.params.size() != model.params().size())
        throw ConfigError("checkpoint: parameter set mismatch");
    for (auto& p : model.params()) {
        auto it = cp.params.find(p.name);
        if (it == cp.params.end()) throw ConfigError("checkpoint: missing parameter " + p.name);
        if (!it->second.same_shape(p.value))
            throw ConfigError("checkpoint: shape mismatch for parameter " + p.name);
        p.value = it->second;
        p.grad.fill(0.0);
    }

    if (opt != nullptr && cp.has_optimizer) {
        opt->set_lr(cp.opt_lr);
        opt->set_step_count(static_cast<long>(cp.opt_t));
        for (auto& p : model.params()) {
            auto it = cp.opt_slots.find(p.name);
            if (it == cp.opt_slots.end()) continue;
            Adam::Slot& s = opt->slot_for(p);
            if (!it->second.first.same_shape(s.m))
                throw ConfigError("checkpoint: optimizer shape mismatch for " + p.name);
            s.m = it->second.first;
            s.v = it->second.second;
        }
    }
}

inline void save_checkpoint_file(const std::string& path, const Checkpoint& cp) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("checkpoint: cannot open " + path + " for writing");
    write_checkpoint(os, cp);
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open " + path);
    return read_checkpoint(is);
}

} // namespace dispat
