#pragma once

#include <filesystem>

#include "qrw/corpus.hpp"
#include "qrw/encoder.hpp"

namespace qrw {

// Checkpoint file (JSON, version 1):
//
//   {
//     "format": "qrw-checkpoint",
//     "version": 1,
//     "config": { "d", "layers", "heads", "ff_width", "attn_hidden", "max_len",
//                 "vocab", "activation", "layer_norm_eps", "seed" },
//     "vocab": [ "[SEP]", "[BOS]", "[UNK]", ... ],
//     "tensors": { name: { "shape": [rows, cols], "data": [row-major doubles] } }
//   }
//
// Tensor names are the ones reported by ModelParams::tensors(). Encoder
// weights are stored input-major (activations are row vectors, y = x W);
// head weights keep their output-major shapes (4 x d, h x 2d).
struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qrw
