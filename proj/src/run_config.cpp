#include "qrw/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qrw/error.hpp"

namespace qrw {

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error("config must be a JSON object");
    if (auto it = j.find("token_mode"); it != j.end()) c.token_mode = parse_token_mode(it->get<std::string>());
    if (auto it = j.find("profile"); it != j.end()) c.profile = parse_profile(it->get<std::string>());
    read(j, "seed", c.seed);
    read(j, "max_answer_len", c.max_answer_len);

    if (auto e = j.find("encoder"); e != j.end()) {
      read(*e, "d", c.encoder.d);
      read(*e, "layers", c.encoder.layers);
      read(*e, "heads", c.encoder.heads);
      read(*e, "ff_width", c.encoder.ff_width);
      read(*e, "attn_hidden", c.encoder.attn_hidden);
      read(*e, "max_len", c.encoder.max_len);
      read(*e, "layer_norm_eps", c.encoder.layer_norm_eps);
      if (auto a = e->find("activation"); a != e->end()) c.encoder.activation = parse_activation(a->get<std::string>());
    }
    if (auto o = j.find("optim"); o != j.end()) {
      read(*o, "learning_rate", c.optim.learning_rate);
      read(*o, "warmup_ratio", c.optim.warmup_ratio);
      read(*o, "batch_size", c.optim.batch_size);
      read(*o, "epochs", c.optim.epochs);
      read(*o, "beta1", c.optim.beta1);
      read(*o, "beta2", c.optim.beta2);
      read(*o, "epsilon", c.optim.epsilon);
    }
    if (auto l = j.find("loss"); l != j.end()) {
      read(*l, "alpha1", c.loss.alpha1);
      read(*l, "alpha2", c.loss.alpha2);
      read(*l, "normalize_inner", c.loss.normalize_inner);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad config: ") + e.what());
  }
  c.sync();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void RunConfig::sync() {
  encoder.seed = seed;
  optim.seed = seed;
  optim.profile = profile;
}

}  // namespace qrw
