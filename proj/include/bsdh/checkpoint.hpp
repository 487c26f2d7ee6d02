#pragma once

#include <string>

#include "bsdh/model.hpp"

namespace bsdh {

// Model checkpoint file, format version 1:
//   magic "BSDH-MDL", version u32 LE, header length u32 LE, textual header
//   (preset, input shape, q, beta, iteration count, layer specs), then each
//   parameter tensor in declaration order as u64 LE element count followed
//   by little-endian f64 values.
// load(save(m)) restores a model whose forward outputs are bit-identical.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace bsdh
