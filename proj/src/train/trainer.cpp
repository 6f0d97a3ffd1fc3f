#include "compm/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "compm/errors.hpp"

namespace compm::train {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and non-negative");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw ConfigError("warmup_fraction must lie in [0, 1]");
  if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"warmup_fraction", c.warmup_fraction},
          {"max_grad_norm", c.max_grad_norm},
          {"beta1", c.adamw.beta1},
          {"beta2", c.adamw.beta2},
          {"eps", c.adamw.eps},
          {"weight_decay", c.adamw.weight_decay},
          {"seed", c.seed},
          {"eval_threads", c.eval_threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    c.adamw.beta1 = j.value("beta1", c.adamw.beta1);
    c.adamw.beta2 = j.value("beta2", c.adamw.beta2);
    c.adamw.eps = j.value("eps", c.adamw.eps);
    c.adamw.weight_decay = j.value("weight_decay", c.adamw.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.eval_threads = j.value("eval_threads", c.eval_threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json TrainRunRecord::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"train_accuracy", e.train_accuracy},
                           {"dev_metric", e.dev_metric ? nlohmann::json(*e.dev_metric) : nlohmann::json()}});
  }
  nlohmann::json j = {{"seed", seed},
                      {"variant", variant},
                      {"headline_metric", headline_metric},
                      {"epochs", epochs_json},
                      {"step_losses", step_losses},
                      {"best_epoch", best_epoch ? nlohmann::json(*best_epoch) : nlohmann::json()},
                      {"best_dev_metric", best_dev_metric ? nlohmann::json(*best_dev_metric) : nlohmann::json()},
                      {"checkpoint", checkpoint_path},
                      {"diverged", diverged},
                      {"config", config}};
  if (diverged) j["divergence"] = divergence;
  if (dev_report) j["dev"] = dev_report->to_json();
  if (test_report) j["test"] = test_report->to_json();
  return j;
}

namespace {

struct Target {
  std::size_t conversation;
  std::size_t turn;
};

}  // namespace

TrainRunRecord train(model::CompmModel& model, const std::vector<data::EncodedConversation>& train_set,
                     const std::vector<data::EncodedConversation>& dev_set, const data::LabelTaxonomy& taxonomy,
                     const TrainConfig& config) {
  config.validate();
  if (model.num_classes() != taxonomy.classes.size()) {
    throw ConfigError("model head has " + std::to_string(model.num_classes()) + " classes but taxonomy '" +
                      taxonomy.name + "' has " + std::to_string(taxonomy.classes.size()));
  }
  std::size_t target_count = 0;
  for (const auto& conv : train_set)
    for (const auto& label : conv.labels) target_count += label.has_value();
  if (target_count == 0) throw ArgumentError("training split has no labeled turns");

  TrainRunRecord record;
  record.seed = config.seed;
  record.variant = model::to_string(model.variant());
  record.headline_metric = data::to_string(taxonomy.headline);
  record.config = {{"model", model::to_json(model.config())}, {"train", to_json(config)}};
  if (config.checkpoint_path) record.checkpoint_path = config.checkpoint_path->string();

  const auto params = model.trainable_parameters();
  AdamW optimizer(params, config.adamw);
  const std::size_t steps_per_epoch = (target_count + config.batch_size - 1) / config.batch_size;
  const auto schedule =
      ScheduleConfig::with_warmup_fraction(steps_per_epoch * config.epochs, config.warmup_fraction, config.lr);

  Rng order_rng(config.seed);
  Rng dropout_rng(config.seed + 1);
  const auto ctx = nn::ForwardContext::train(dropout_rng);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  nn::ParameterSnapshot best = nn::snapshot(params);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs && !record.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    std::vector<Target> targets;
    for (auto c : order)
      for (std::size_t t = 0; t < train_set[c].size(); ++t)
        if (train_set[c].labels[t]) targets.push_back({c, t});

    double loss_sum = 0.0;
    std::size_t correct = 0, steps_this_epoch = 0;
    for (std::size_t start = 0; start < targets.size(); start += config.batch_size) {
      const std::size_t end = std::min(targets.size(), start + config.batch_size);
      try {
        std::vector<Tensor> logits;
        std::vector<std::size_t> labels;
        for (std::size_t b = start; b < end;) {
          const std::size_t conv = targets[b].conversation;
          std::vector<std::size_t> turns;
          for (; b < end && targets[b].conversation == conv; ++b) turns.push_back(targets[b].turn);
          for (auto& trace : model.forward_turns(train_set[conv], turns, ctx)) {
            const std::size_t gold = *train_set[conv].labels[trace.turn];
            correct += trace.predicted == gold;
            logits.push_back(trace.logits);
            labels.push_back(gold);
          }
        }
        const Tensor loss = cross_entropy(concatenate(logits, 0), labels);
        if (!std::isfinite(loss.item())) throw NumericError("non-finite training loss");
        backward(loss);
        Tape::current().clear();
        clip_gradients(params, config.max_grad_norm);
        optimizer.step(lr_at(schedule, step));
        optimizer.zero_grad();
        record.step_losses.push_back(loss.item());
        loss_sum += loss.item();
        ++step;
        ++steps_this_epoch;
      } catch (const NumericError& e) {
        Tape::current().clear();
        optimizer.zero_grad();
        record.diverged = true;
        record.divergence = "epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " + e.what();
        spdlog::error("training diverged at {}", record.divergence);
        break;
      }
    }
    if (record.diverged) break;

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, steps_this_epoch));
    er.train_accuracy = static_cast<double>(correct) / static_cast<double>(targets.size());
    bool improved = dev_set.empty();
    if (!dev_set.empty()) {
      auto report = evaluate(model, dev_set, taxonomy, config.eval_threads);
      er.dev_metric = report.headline_value();
      improved = !record.best_dev_metric || *er.dev_metric > *record.best_dev_metric;
      if (improved) {
        record.best_dev_metric = er.dev_metric;
        record.dev_report = std::move(report);
      }
    }
    if (improved) {
      record.best_epoch = epoch;
      best = nn::snapshot(params);
      if (config.checkpoint_path) {
        auto header = config.checkpoint_header.is_object() ? config.checkpoint_header : nlohmann::json::object();
        header["epoch"] = epoch;
        header["seed"] = config.seed;
        model.save(*config.checkpoint_path, header, config.storage);
      }
    }
    spdlog::info("epoch {}/{} loss {:.4f} train_acc {:.4f}{}", epoch, config.epochs, er.train_loss,
                 er.train_accuracy,
                 er.dev_metric ? fmt::format(" dev_{} {:.4f}", record.headline_metric, *er.dev_metric) : "");
    record.epochs.push_back(er);
  }
  // Restores the dev-best weights, or the weights before the failed step when no epoch finished.
  if (record.best_epoch) nn::restore(params, best);
  return record;
}

RunAverage average_runs(const std::vector<double>& values) {
  RunAverage a;
  a.values = values;
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return a;
}

}  // namespace compm::train
