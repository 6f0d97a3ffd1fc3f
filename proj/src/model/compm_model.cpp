#include "compm/model/compm_model.hpp"

#include <map>

#include "compm/errors.hpp"

namespace compm::model {

namespace {

constexpr const char* kFormat = "compm-model";

}  // namespace

nlohmann::json vocabulary_to_json(const data::Vocabulary& vocab) { return vocab.serialize(); }

data::Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  if (!j.is_string()) throw FormatError("checkpoint vocabulary must be a string");
  return data::Vocabulary::parse(j.get<std::string>());
}

CompmModel::CompmModel(ModelConfig config, data::Vocabulary vocab, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  if (config_.context.vocab_size == 0) config_.context.vocab_size = vocab_.size();
  if (config_.memory.vocab_size == 0) config_.memory.vocab_size = vocab_.size();
  config_.validate();
  if (uses_context_encoder(config_.variant) && config_.context.vocab_size != vocab_.size()) {
    throw ConfigError("context encoder vocab_size " + std::to_string(config_.context.vocab_size) +
                      " does not match the vocabulary (" + std::to_string(vocab_.size()) + ")");
  }
  if (uses_memory_encoder(config_.variant) && config_.memory.vocab_size != vocab_.size()) {
    throw ConfigError("memory encoder vocab_size " + std::to_string(config_.memory.vocab_size) +
                      " does not match the vocabulary (" + std::to_string(vocab_.size()) + ")");
  }

  Rng rng(seed);
  if (uses_context_encoder(config_.variant)) com_.emplace(config_.context, rng);
  if (uses_memory_encoder(config_.variant)) pm_.emplace(config_.memory, rng);
  if (uses_tracking(config_.variant)) {
    nn::GruConfig gru;
    gru.input_dim = config_.memory.hidden_dim;
    gru.hidden_dim = config_.memory.hidden_dim;
    gru.num_layers = config_.gru_layers;
    gru.dropout_rate = config_.gru_dropout;
    tracker_.emplace(gru, rng);
    if (config_.has_projection()) w_p_.emplace(config_.memory.hidden_dim, config_.context.hidden_dim, false, rng);
  }
  w_o_ = nn::Linear(config_.head_input_dim(), config_.num_classes, true, rng);

  if (pm_ && !memory_encoder_trainable(config_.variant)) {
    nn::ParameterList frozen;
    pm_->append_parameters("pm", frozen);
    for (auto& p : frozen) p.tensor.set_requires_grad(false);
  }
}

Tensor CompmModel::encode_context(std::span<const TokenId> ids, const nn::AttentionMask& mask,
                                  const ForwardContext& ctx) const {
  if (!com_) throw ContractError("variant " + to_string(config_.variant) + " has no context encoder");
  if (ids.empty() || ids[0] != data::Vocabulary::cls_id()) {
    throw ContractError("assembled context must begin with <cls>");
  }
  return nn::cls_vector(com_->encode(ids, mask, ctx));
}

Tensor CompmModel::encode_memory(const std::vector<TokenId>& utterance, const ForwardContext& ctx) const {
  if (!pm_) throw ContractError("variant " + to_string(config_.variant) + " has no memory encoder");
  const auto ids = data::utterance_input(utterance, config_.memory.max_positions);
  const auto mask = nn::AttentionMask::all(ids.size());
  if (!memory_encoder_trainable(config_.variant)) {
    NoGradGuard guard;
    return nn::cls_vector(pm_->encode(ids, mask, ForwardContext::eval()));
  }
  return nn::cls_vector(pm_->encode(ids, mask, ctx));
}

std::vector<std::size_t> CompmModel::memory_turns(const data::EncodedConversation& conversation, std::size_t turn) {
  if (turn >= conversation.size()) {
    throw ArgumentError("turn " + std::to_string(turn) + " outside a conversation of " +
                        std::to_string(conversation.size()) + " turns");
  }
  std::vector<std::size_t> turns;
  for (std::size_t i = 0; i < turn; ++i) {
    if (conversation.speakers[i] == conversation.speakers[turn]) turns.push_back(i);
  }
  return turns;
}

std::vector<Tensor> CompmModel::extract_memories(const data::EncodedConversation& conversation, std::size_t turn,
                                                 const ForwardContext& ctx) const {
  std::vector<Tensor> out;
  for (std::size_t i : memory_turns(conversation, turn)) out.push_back(encode_memory(conversation.tokens[i], ctx));
  return out;
}

Tensor CompmModel::track(const std::vector<Tensor>& memories, const ForwardContext& ctx) const {
  if (!tracker_) throw ContractError("variant " + to_string(config_.variant) + " does not track memories");
  return track_checked(memories, ctx);
}

Tensor CompmModel::track_checked(const std::vector<Tensor>& memories, const ForwardContext& ctx) const {
  const std::size_t width = config_.memory.hidden_dim;
  if (memories.empty()) return Tensor::zeros({1, width});
  for (const auto& m : memories) {
    if (!m.defined() || m.rank() != 2 || m.rows() != 1 || m.cols() != width) {
      throw DimensionError("memory vectors must be [1x" + std::to_string(width) + "], got " +
                           (m.defined() ? shape_string(m.shape()) : std::string("undefined")));
    }
  }
  return tracker_->forward(concatenate(memories, 0), ctx);
}

Tensor CompmModel::fuse(const Tensor& context, const Tensor& tracked) const {
  if (w_p_) return add(context, (*w_p_)(tracked));
  if (context.shape() != tracked.shape()) {
    throw ConfigError("cannot add " + shape_string(tracked.shape()) + " memory state to " +
                      shape_string(context.shape()) + " context without a projection");
  }
  return add(context, tracked);
}

Prediction CompmModel::predict(const Tensor& fused) const {
  Prediction p;
  p.logits = w_o_(fused);
  const Tensor probs = softmax(p.logits, 1);
  p.probabilities.assign(probs.data().begin(), probs.data().end());
  for (std::size_t c = 1; c < p.probabilities.size(); ++c) {
    if (p.probabilities[c] > p.probabilities[p.predicted]) p.predicted = c;
  }
  return p;
}

ForwardTrace CompmModel::forward(const data::EncodedConversation& conversation, std::size_t turn,
                                 const ForwardContext& ctx) const {
  const std::size_t turns[] = {turn};
  return std::move(forward_turns(conversation, turns, ctx).front());
}

std::vector<ForwardTrace> CompmModel::forward_turns(const data::EncodedConversation& conversation,
                                                    std::span<const std::size_t> turns,
                                                    const ForwardContext& ctx) const {
  std::map<std::size_t, Tensor> memory_cache;
  auto memory_of = [&](std::size_t i) {
    auto it = memory_cache.find(i);
    if (it == memory_cache.end()) it = memory_cache.emplace(i, encode_memory(conversation.tokens[i], ctx)).first;
    return it->second;
  };

  std::vector<ForwardTrace> traces;
  traces.reserve(turns.size());
  for (std::size_t turn : turns) {
    if (turn >= conversation.size()) {
      throw ArgumentError("turn " + std::to_string(turn) + " outside a conversation of " +
                          std::to_string(conversation.size()) + " turns");
    }
    ForwardTrace trace;
    trace.turn = turn;
    if (config_.variant == VariantMode::PMOnly) {
      trace.fused = memory_of(turn);
    } else {
      const auto assembled = data::assemble_context(vocab_, conversation, turn, config_.context.max_positions);
      trace.context = encode_context(assembled.ids, nn::AttentionMask{assembled.mask}, ctx);
      trace.fused = trace.context;
      if (tracker_) {
        trace.memory_turns = memory_turns(conversation, turn);
        for (std::size_t i : trace.memory_turns) trace.memories.push_back(memory_of(i));
        trace.tracked = track_checked(trace.memories, ctx);
        if (!trace.memories.empty()) trace.fused = fuse(trace.context, trace.tracked);
      }
    }
    auto prediction = predict(trace.fused);
    trace.logits = prediction.logits;
    trace.probabilities = std::move(prediction.probabilities);
    trace.predicted = prediction.predicted;
    traces.push_back(std::move(trace));
  }
  return traces;
}

Tensor CompmModel::context_only_logits(const data::EncodedConversation& conversation, std::size_t turn,
                                       const ForwardContext& ctx) const {
  if (turn >= conversation.size()) throw ArgumentError("turn outside the conversation");
  const auto assembled = data::assemble_context(vocab_, conversation, turn, config_.context.max_positions);
  return w_o_(encode_context(assembled.ids, nn::AttentionMask{assembled.mask}, ctx));
}

nn::ParameterList CompmModel::parameters() const {
  nn::ParameterList out;
  if (com_) com_->append_parameters("com", out);
  if (pm_) pm_->append_parameters("pm", out);
  if (tracker_) tracker_->append_parameters("tracker", out);
  if (w_p_) w_p_->append_parameters("w_p", out);
  w_o_.append_parameters("w_o", out);
  return out;
}

nn::ParameterList CompmModel::trainable_parameters() const {
  nn::ParameterList out;
  if (com_) com_->append_parameters("com", out);
  if (pm_ && memory_encoder_trainable(config_.variant)) pm_->append_parameters("pm", out);
  if (tracker_) tracker_->append_parameters("tracker", out);
  if (w_p_) w_p_->append_parameters("w_p", out);
  w_o_.append_parameters("w_o", out);
  return out;
}

void CompmModel::check_vocabulary(const nn::Checkpoint& pretrained) const {
  if (!pretrained.header.contains("vocab")) throw FormatError("pretrained checkpoint carries no vocabulary");
  if (!(vocabulary_from_json(pretrained.header.at("vocab")) == vocab_)) {
    throw ConfigError("pretrained checkpoint vocabulary differs from the model vocabulary");
  }
}

bool CompmModel::load_pretrained_memory(const nn::Checkpoint& pretrained) {
  if (!pm_ || !loads_pretrained_memory(config_.variant)) return false;
  check_vocabulary(pretrained);
  nn::ParameterList targets;
  pm_->append_parameters("pm", targets);
  assign_parameters(pretrained, targets, "pm", "encoder");
  return true;
}

bool CompmModel::load_pretrained_context(const nn::Checkpoint& pretrained) {
  if (!com_) return false;
  check_vocabulary(pretrained);
  nn::ParameterList targets;
  com_->append_parameters("com", targets);
  assign_parameters(pretrained, targets, "com", "encoder");
  return true;
}

nlohmann::json CompmModel::checkpoint_header(const nlohmann::json& extra) const {
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["format"] = kFormat;
  header["model"] = to_json(config_);
  header["vocab"] = vocabulary_to_json(vocab_);
  return header;
}

void CompmModel::save(const std::filesystem::path& path, const nlohmann::json& extra, nn::StorageType storage) const {
  nn::save_checkpoint(path, checkpoint_header(extra), parameters(), storage);
}

CompmModel CompmModel::from_checkpoint(const nn::Checkpoint& checkpoint) {
  const auto& h = checkpoint.header;
  if (h.value("format", std::string()) != kFormat || !h.contains("model") || !h.contains("vocab")) {
    throw FormatError("not a model checkpoint (missing format, model or vocab header fields)");
  }
  CompmModel model(model_config_from_json(h.at("model")), vocabulary_from_json(h.at("vocab")), 0);
  const auto params = model.parameters();
  const std::size_t assigned = assign_parameters(checkpoint, params);
  if (assigned != checkpoint.arrays.size()) {
    throw FormatError("model checkpoint holds " + std::to_string(checkpoint.arrays.size() - assigned) +
                      " arrays the configured variant does not use");
  }
  return model;
}

CompmModel CompmModel::load(const std::filesystem::path& path) { return from_checkpoint(nn::load_checkpoint(path)); }

}  // namespace compm::model
