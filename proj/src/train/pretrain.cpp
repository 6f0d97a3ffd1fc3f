#include "compm/train/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "compm/data/context.hpp"
#include "compm/errors.hpp"
#include "compm/model/compm_model.hpp"

namespace compm::train {

void PretrainConfig::validate() const {
  encoder.validate();
  if (epochs == 0) throw ConfigError("pretraining needs at least one epoch");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("mask_rate must lie in (0, 1)");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw ConfigError("warmup_fraction must lie in [0, 1]");
}

MaskedInput mask_tokens(const std::vector<TokenId>& input, double rate, Rng& rng) {
  if (input.size() < 2 || input[0] != data::Vocabulary::cls_id()) {
    throw ArgumentError("masked input needs <cls> followed by at least one token");
  }
  MaskedInput out;
  out.ids = input;
  for (std::size_t i = 1; i < input.size(); ++i) {
    if (rng.uniform() < rate) out.positions.push_back(i);
  }
  if (out.positions.empty()) out.positions.push_back(1 + rng.next() % (input.size() - 1));
  for (auto pos : out.positions) {
    out.targets.push_back(input[pos]);
    out.ids[pos] = data::Vocabulary::mask_id();
  }
  return out;
}

nn::ParameterList PretrainResult::parameters() const {
  nn::ParameterList out;
  encoder.append_parameters("encoder", out);
  head.append_parameters("mlm_head", out);
  return out;
}

nlohmann::json PretrainResult::header(const data::Vocabulary& vocab) const {
  return {{"format", "compm-pretrained-encoder"},
          {"encoder", encoder.config()},
          {"vocab", model::vocabulary_to_json(vocab)},
          {"epoch_losses", epoch_losses}};
}

void PretrainResult::save(const std::filesystem::path& path, const data::Vocabulary& vocab,
                          nn::StorageType storage) const {
  nn::save_checkpoint(path, header(vocab), parameters(), storage);
}

PretrainResult pretrain_memory_encoder(const data::Vocabulary& vocab,
                                       const std::vector<std::vector<TokenId>>& utterances,
                                       const PretrainConfig& config_in) {
  PretrainConfig config = config_in;
  if (config.encoder.vocab_size == 0) config.encoder.vocab_size = vocab.size();
  config.validate();
  if (config.encoder.vocab_size != vocab.size()) throw ConfigError("encoder vocab_size does not match the vocabulary");

  std::vector<std::vector<TokenId>> inputs;
  for (const auto& u : utterances) {
    if (!u.empty()) inputs.push_back(data::utterance_input(u, config.encoder.max_positions));
  }
  if (inputs.empty()) throw ArgumentError("pretraining corpus has no non-empty utterances");

  Rng init(config.seed);
  PretrainResult result{nn::TransformerEncoder(config.encoder, init),
                        nn::Linear(config.encoder.hidden_dim, vocab.size(), true, init), {}};
  const auto params = result.parameters();
  AdamW optimizer(params, config.adamw);
  const std::size_t steps_per_epoch = (inputs.size() + config.batch_size - 1) / config.batch_size;
  const auto schedule =
      ScheduleConfig::with_warmup_fraction(steps_per_epoch * config.epochs, config.warmup_fraction, config.lr);

  Rng order_rng(config.seed + 1);
  Rng mask_rng(config.seed + 2);
  Rng dropout_rng(config.seed + 3);
  const auto ctx = nn::ForwardContext::train(dropout_rng);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> rows;
      std::vector<std::size_t> targets;
      for (std::size_t b = start; b < end; ++b) {
        const auto masked = mask_tokens(inputs[order[b]], config.mask_rate, mask_rng);
        const auto hidden = result.encoder.encode(masked.ids, nn::AttentionMask::all(masked.ids.size()), ctx);
        for (std::size_t m = 0; m < masked.positions.size(); ++m) {
          rows.push_back(slice(hidden, 0, masked.positions[m], 1));
          targets.push_back(masked.targets[m]);
        }
      }
      const Tensor loss = cross_entropy(result.head(concatenate(rows, 0)), targets);
      total += loss.item();
      backward(loss);
      Tape::current().clear();
      clip_gradients(params, config.max_grad_norm);
      optimizer.step(lr_at(schedule, step++));
      optimizer.zero_grad();
    }
    result.epoch_losses.push_back(total / static_cast<double>(steps_per_epoch));
    spdlog::info("pretrain epoch {}/{} loss {:.4f}", epoch + 1, config.epochs, result.epoch_losses.back());
  }
  return result;
}

nn::TransformerEncoder load_pretrained_encoder(const nn::Checkpoint& checkpoint, const data::Vocabulary& vocab) {
  const auto& h = checkpoint.header;
  if (!h.contains("encoder") || !h.contains("vocab")) {
    throw FormatError("pretrained checkpoint header needs encoder and vocab fields");
  }
  if (!(model::vocabulary_from_json(h.at("vocab")) == vocab)) {
    throw ConfigError("pretrained checkpoint vocabulary differs from the supplied vocabulary");
  }
  Rng rng(0);
  nn::TransformerEncoder encoder(h.at("encoder").get<nn::EncoderConfig>(), rng);
  nn::ParameterList targets;
  encoder.append_parameters("encoder", targets);
  nn::assign_parameters(checkpoint, targets, "encoder", "encoder");
  return encoder;
}

}  // namespace compm::train
