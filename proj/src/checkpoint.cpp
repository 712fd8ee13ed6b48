#include "qrw/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "qrw/error.hpp"

namespace qrw {

namespace {

constexpr const char* kFormat = "qrw-checkpoint";
constexpr int kVersion = 1;

nlohmann::json config_to_json(const EncoderConfig& c) {
  return {{"d", c.d},
          {"layers", c.layers},
          {"heads", c.heads},
          {"ff_width", c.ff()},
          {"attn_hidden", c.hidden()},
          {"max_len", c.max_len},
          {"vocab", c.vocab},
          {"activation", std::string(to_string(c.activation))},
          {"layer_norm_eps", c.layer_norm_eps},
          {"seed", c.seed}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.d = j.at("d").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_width = j.at("ff_width").get<int>();
  c.attn_hidden = j.at("attn_hidden").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab = j.at("vocab").get<int>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Vocabulary& vocab) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = config_to_json(params.config);
  j["vocab"] = vocab.words();
  auto& tensors = j["tensors"] = nlohmann::json::object();
  for (const auto& t : params.tensors()) {
    const Matrix& m = *t.tensor;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    tensors[t.name] = {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format") != kFormat) throw Error("not a qrw checkpoint: " + path.string());
    if (j.at("version").get<int>() != kVersion)
      throw Error("unsupported checkpoint version in " + path.string());

    Checkpoint ck{ModelParams::zeros(config_from_json(j.at("config"))),
                  Vocabulary::from_words(j.at("vocab").get<std::vector<std::string>>())};
    if (ck.vocab.size() != static_cast<std::size_t>(ck.params.config.vocab))
      throw ShapeError("checkpoint vocabulary size does not match config");

    const auto& tensors = j.at("tensors");
    for (auto& t : ck.params.tensors()) {
      const auto& entry = tensors.at(t.name);
      auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      auto data = entry.at("data").get<std::vector<double>>();
      Matrix& m = *t.tensor;
      if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols() ||
          static_cast<Eigen::Index>(data.size()) != m.size())
        throw ShapeError("tensor '" + t.name + "' has the wrong shape");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace qrw
