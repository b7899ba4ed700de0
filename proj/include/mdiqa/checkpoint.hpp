// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-file checkpoint container: magic + version, a JSON metadata block
// (config snapshot, stage marker, counters, seeds), a sorted table of named
// little-endian float32 tensors, and a trailing CRC32 over everything before
// it. Save -> load -> save is byte-identical.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include "mdiqa/aggregate.hpp"
#include "mdiqa/config.hpp"
#include "mdiqa/optim.hpp"

namespace mdiqa {

struct CheckpointData {
    Config config;
    int stage = 0;             // 1, 2, or 3 (restorer)
    long long step = 0;        // global step counter at save time
    long long adam_t = 0;      // optimizer timestep
    std::uint64_t seed = 0;
    // name -> (shape, float32 payload); "param/..." entries hold model
    // parameters, "adam_m/..." and "adam_v/..." the optimizer moments.
    std::map<std::string, std::pair<ad::Shape, std::vector<float>>> tensors;
};

namespace detail {

constexpr char kCkptMagic[8] = {'M', 'D', 'I', 'Q', 'A', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const CheckpointData& data) {
    std::string buf;
    buf.append(detail::kCkptMagic, 8);
    detail::put_u32(buf, detail::kCkptVersion);

    json meta;
    meta["config"] = to_json(data.config);
    meta["stage"] = data.stage;
    meta["step"] = data.step;
    meta["adam_t"] = data.adam_t;
    meta["seed"] = data.seed;
    const std::string meta_str = meta.dump();
    detail::put_u64(buf, meta_str.size());
    buf.append(meta_str);

    detail::put_u32(buf, static_cast<std::uint32_t>(data.tensors.size()));
    for (const auto& [name, entry] : data.tensors) {
        const auto& [shape, values] = entry;
        detail::put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.append(name);
        detail::put_u32(buf, static_cast<std::uint32_t>(shape.size()));
        std::int64_t expect = 1;
        for (int d : shape) {
            detail::put_u32(buf, static_cast<std::uint32_t>(d));
            expect *= d;
        }
        if (expect != static_cast<std::int64_t>(values.size()))
            throw std::runtime_error("checkpoint tensor size mismatch for " + name);
        detail::put_u64(buf, values.size());
        for (float v : values) detail::put_f32(buf, v);
    }

    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    detail::put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

inline CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw std::runtime_error("truncated checkpoint");

    const std::uint32_t stored_crc = [&] {
        detail::Reader r{buf, buf.size() - 4};
        return r.u32();
    }();
    const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc)
        throw std::runtime_error("checkpoint checksum mismatch (corrupted file): " + path);

    detail::Reader r{buf};
    if (r.bytes(8) != std::string(detail::kCkptMagic, 8))
        throw std::runtime_error("not an MDIQA checkpoint: " + path);
    const std::uint32_t version = r.u32();
    if (version != detail::kCkptVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " (expected " + std::to_string(detail::kCkptVersion) + ")");

    CheckpointData data;
    const std::uint64_t meta_len = r.u64();
    const json meta = json::parse(r.bytes(meta_len));
    data.config = config_from_json(meta.at("config"));
    data.stage = meta.at("stage").get<int>();
    data.step = meta.at("step").get<long long>();
    data.adam_t = meta.at("adam_t").get<long long>();
    data.seed = meta.at("seed").get<std::uint64_t>();

    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        ad::Shape shape;
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(r.u32()));
            numel *= shape.back();
        }
        const std::uint64_t len = r.u64();
        if (static_cast<std::int64_t>(len) != numel)
            throw std::runtime_error("checkpoint tensor size mismatch for " + name);
        std::vector<float> values(len);
        for (auto& v : values) v = r.f32();
        data.tensors.emplace(name, std::make_pair(std::move(shape), std::move(values)));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Model/optimizer <-> checkpoint plumbing

template <typename T>
void store_model(CheckpointData& data, const Model<T>& model) {
    model.visit([&](const std::string& name, const ad::TP<T>& t) {
        std::vector<float> vals(t->v.size());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(t->v[i]);
        data.tensors["param/" + name] = {t->shape, std::move(vals)};
    });
}

template <typename T>
void store_optimizer(CheckpointData& data, const AdamW<T>& opt) {
    data.adam_t = opt.timestep();
    for (const auto& slot : opt.slots()) {
        std::vector<float> m(slot.m.size()), v(slot.v.size());
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(slot.m[i]);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(slot.v[i]);
        data.tensors["adam_m/" + slot.name] = {slot.p->shape, std::move(m)};
        data.tensors["adam_v/" + slot.name] = {slot.p->shape, std::move(v)};
    }
}

template <typename T>
void restore_model(const CheckpointData& data, Model<T>& model) {
    model.visit([&](const std::string& name, const ad::TP<T>& t) {
        const auto it = data.tensors.find("param/" + name);
        if (it == data.tensors.end())
            throw std::runtime_error("checkpoint is missing tensor param/" + name);
        const auto& [shape, values] = it->second;
        if (shape != t->shape)
            throw std::runtime_error("checkpoint tensor shape mismatch for param/" + name);
        for (std::size_t i = 0; i < values.size(); ++i) t->v[i] = static_cast<T>(values[i]);
    });
}

template <typename T>
void restore_optimizer(const CheckpointData& data, AdamW<T>& opt) {
    opt.set_timestep(data.adam_t);
    for (auto& slot : opt.slots()) {
        const auto mi = data.tensors.find("adam_m/" + slot.name);
        const auto vi = data.tensors.find("adam_v/" + slot.name);
        if (mi == data.tensors.end() || vi == data.tensors.end()) continue;  // fresh group
        for (std::size_t i = 0; i < slot.m.size(); ++i) slot.m[i] = static_cast<T>(mi->second.second[i]);
        for (std::size_t i = 0; i < slot.v.size(); ++i) slot.v[i] = static_cast<T>(vi->second.second[i]);
    }
}

}  // namespace mdiqa
