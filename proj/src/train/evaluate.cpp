#include "compm/train/evaluate.hpp"

#include <algorithm>
#include <thread>

#include "compm/errors.hpp"

namespace compm::train {

namespace {

std::vector<TurnPrediction> predict_conversation(const model::CompmModel& model,
                                                 const data::EncodedConversation& conv) {
  NoGradGuard guard;
  std::vector<std::size_t> turns(conv.size());
  for (std::size_t t = 0; t < turns.size(); ++t) turns[t] = t;
  std::vector<TurnPrediction> out;
  for (auto& trace : model.forward_turns(conv, turns)) {
    TurnPrediction p;
    p.conversation = conv.id;
    p.turn = trace.turn;
    p.gold = conv.labels.size() > trace.turn ? conv.labels[trace.turn] : std::nullopt;
    p.predicted = trace.predicted;
    p.probabilities = std::move(trace.probabilities);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<TurnPrediction> predict_corpus(const model::CompmModel& model,
                                           const std::vector<data::EncodedConversation>& corpus,
                                           std::size_t threads) {
  std::vector<std::vector<TurnPrediction>> per_conversation(corpus.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, corpus.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) per_conversation[i] = predict_conversation(model, corpus[i]);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < corpus.size(); i += threads) {
            per_conversation[i] = predict_conversation(model, corpus[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<TurnPrediction> out;
  for (auto& conv : per_conversation)
    for (auto& p : conv) out.push_back(std::move(p));
  return out;
}

ConfusionMatrix confusion_of(const std::vector<TurnPrediction>& predictions, std::size_t classes) {
  ConfusionMatrix m(classes);
  for (const auto& p : predictions)
    if (p.gold) m.add(*p.gold, p.predicted);
  return m;
}

MetricsReport evaluate(const model::CompmModel& model, const std::vector<data::EncodedConversation>& corpus,
                       const data::LabelTaxonomy& taxonomy, std::size_t threads) {
  if (model.num_classes() != taxonomy.classes.size()) {
    throw ConfigError("model head has " + std::to_string(model.num_classes()) + " classes but taxonomy '" +
                      taxonomy.name + "' has " + std::to_string(taxonomy.classes.size()));
  }
  const auto confusion = confusion_of(predict_corpus(model, corpus, threads), model.num_classes());
  if (confusion.total() == 0) throw ArgumentError("evaluation corpus has no labeled turns");
  return compute_metrics(confusion, taxonomy);
}

}  // namespace compm::train
