#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include "affect/binio.hpp"
#include "affect/gru.hpp"
#include "affect/mlp.hpp"
#include "affect/ridge.hpp"

namespace affect {

// Flat binary parameter files: 8-byte magic, shape header (u32), then the
// parameter payload as little-endian 64-bit reals in a fixed field order.

namespace detail {

constexpr char kMlpMagic[] = "AFMLP001";
constexpr char kGruMagic[] = "AFGRU001";
constexpr char kRidgeMagic[] = "AFRDG001";

inline void put_views(std::ofstream& out, const ParamViews& views) {
    for (const auto& v : views) {
        for (double x : v) {
            put_f64(out, x);
        }
    }
}

inline void get_views(std::ifstream& in, const std::string& path, const ParamViews& views) {
    for (const auto& v : views) {
        for (double& x : v) {
            x = get_f64(in, path);
        }
    }
}

inline void check_magic(std::ifstream& in, const std::string& path, const char* magic) {
    char buf[8];
    in.read(buf, 8);
    if (!in || std::string(buf, 8) != std::string(magic, 8)) {
        throw std::runtime_error(path + ": wrong file type (expected " + magic + ")");
    }
}

}  // namespace detail

inline void save_mlp(const std::string& path, MlpParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out.write(detail::kMlpMagic, 8);
    detail::put_u32(out, static_cast<std::uint32_t>(params.input_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(params.hidden_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(params.output_dim()));
    detail::put_u32(out, params.activation == Activation::relu ? 0u : 1u);
    detail::put_views(out, params.views());
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

inline MlpParams load_mlp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    detail::check_magic(in, path, detail::kMlpMagic);
    const int input = static_cast<int>(detail::get_u32(in, path));
    const int hidden = static_cast<int>(detail::get_u32(in, path));
    const int outputs = static_cast<int>(detail::get_u32(in, path));
    const std::uint32_t act = detail::get_u32(in, path);
    MlpParams params;
    params.w1 = Mat(hidden, input);
    params.b1.assign(hidden, 0.0);
    params.w2 = Mat(outputs, hidden);
    params.b2.assign(outputs, 0.0);
    params.activation = act == 0 ? Activation::relu : Activation::identity;
    detail::get_views(in, path, params.views());
    return params;
}

inline void save_gru(const std::string& path, GruParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out.write(detail::kGruMagic, 8);
    detail::put_u32(out, static_cast<std::uint32_t>(params.input_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(params.hidden_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(params.output_dim()));
    detail::put_views(out, params.views());
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

inline GruParams load_gru(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    detail::check_magic(in, path, detail::kGruMagic);
    const int input = static_cast<int>(detail::get_u32(in, path));
    const int hidden = static_cast<int>(detail::get_u32(in, path));
    const int outputs = static_cast<int>(detail::get_u32(in, path));
    GruParams params = init_gru(input, hidden, outputs, 0);
    detail::get_views(in, path, params.views());
    return params;
}

inline void save_ridge(const std::string& path, const RidgeParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out.write(detail::kRidgeMagic, 8);
    detail::put_u32(out, static_cast<std::uint32_t>(params.input_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(params.output_dim()));
    detail::put_f64(out, params.lambda);
    for (double v : params.weights.a) {
        detail::put_f64(out, v);
    }
    for (double v : params.bias) {
        detail::put_f64(out, v);
    }
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

inline RidgeParams load_ridge(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    detail::check_magic(in, path, detail::kRidgeMagic);
    const int input = static_cast<int>(detail::get_u32(in, path));
    const int outputs = static_cast<int>(detail::get_u32(in, path));
    RidgeParams params;
    params.lambda = detail::get_f64(in, path);
    params.weights = Mat(outputs, input);
    params.bias.assign(outputs, 0.0);
    for (double& v : params.weights.a) {
        v = detail::get_f64(in, path);
    }
    for (double& v : params.bias) {
        v = detail::get_f64(in, path);
    }
    return params;
}

}  // namespace affect
