#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "qrw/corpus.hpp"
#include "qrw/encoder.hpp"
#include "qrw/trainer.hpp"

namespace qrw {

// Settings shared by every subcommand. Loaded from a JSON file shaped like
//
//   { "token_mode": "word", "seed": 13, "profile": "deterministic",
//     "max_answer_len": 30,
//     "encoder": { "d", "layers", "heads", "ff_width", "attn_hidden", "max_len",
//                  "activation", "layer_norm_eps" },
//     "optim":   { "learning_rate", "warmup_ratio", "batch_size", "epochs",
//                  "beta1", "beta2", "epsilon" },
//     "loss":    { "alpha1", "alpha2", "normalize_inner" } }
//
// Every key is optional; missing keys keep their defaults.
struct RunConfig {
  TokenMode token_mode = TokenMode::kWord;
  std::uint64_t seed = 13;
  Profile profile = Profile::kDeterministic;
  std::size_t max_answer_len = 30;
  EncoderConfig encoder;
  OptimConfig optim;
  LossConfig loss;

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json_text(const std::string& text);

  // Pushes seed and profile down into the nested configs.
  void sync();
};

}  // namespace qrw
