#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "mvlab/particle_sim.hpp"

namespace mvlab {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Versioned little-endian ensemble layout (version 1):
///   "MVLE" | u32 version | u32 J | u32 M | u32 K | u32 n | u64 seed
///   | f64 times[M + 1] | f64 init_x[J]
///   | per particle: f64 states[J (M + 1)] column-major, f64 probs[M K] row-major
std::string encode_ensemble(const Ensemble& e);
Ensemble decode_ensemble(const std::string& bytes);

}  // namespace mvlab
