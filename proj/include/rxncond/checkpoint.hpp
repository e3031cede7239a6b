#pragma once

// NTF1 checkpoint container: magic "NTF1", u32 LE entry count, then per
// entry u16 LE name length, UTF-8 name, u8 dtype (0=f32, 1=f64), u8 rank,
// rank x u32 LE dims, raw little-endian payload. Round-trips bit-exactly.

#include <map>
#include <string>

#include "rxncond/params.hpp"
#include "rxncond/tensor.hpp"

namespace rxncond {

void save_tensors(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_tensors(const std::string& path);

// Store helpers: saving writes every parameter; loading replaces the
// store contents (tensor dtypes come from the file).
void save_checkpoint(const std::string& path, const ParamStore& store);
void load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace rxncond
