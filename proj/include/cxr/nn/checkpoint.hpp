#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cxr/nn/network.hpp"

namespace cxr::nn {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// "CKPT", u32 LE version (1), u32 LE count; per tensor: u32 LE name length,
// UTF-8 name, u32 LE ndim, ndim x u32 LE dims, then f64 LE values.
std::vector<std::uint8_t> encode_checkpoint(const Parameters& params);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Parameters& params, const std::filesystem::path& path);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into `params` by name. With require_all, every parameter
/// must be present; otherwise unmatched parameters keep their values.
/// Returns the number of tensors copied. Throws on shape mismatch.
std::size_t import_parameters(Parameters& params, std::span<const NamedTensor> tensors,
                              bool require_all);

}  // namespace cxr::nn
