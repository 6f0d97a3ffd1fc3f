#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "compm/data/context.hpp"
#include "compm/data/corpus.hpp"
#include "compm/data/taxonomy.hpp"
#include "compm/data/tokenizer.hpp"
#include "compm/data/vocabulary.hpp"
#include "compm/errors.hpp"
#include "json.hpp"

namespace compm::data {
namespace {

std::string line(const std::string& conv, long long turn, const std::string& speaker, const std::string& text,
                 const std::string& label) {
  return nlohmann::json{{"conv_id", conv}, {"turn", turn}, {"speaker", speaker}, {"text", text}, {"label", label}}
             .dump() +
         "\n";
}

/// Six turns with speakers A B A C B A.
Conversation six_turn_dialogue() {
  Conversation c{"fig2", {}};
  const std::vector<std::string> speakers{"A", "B", "A", "C", "B", "A"};
  const std::vector<std::string> texts{"i got the job", "that is great news", "thanks , i am so happy",
                                       "congratulations !", "when do you start ?", "next monday"};
  for (std::size_t i = 0; i < 6; ++i) c.utterances.push_back({static_cast<long long>(i), speakers[i], texts[i], "joy"});
  return c;
}

TEST(Tokenizer, SegmentsWordsAndPunctuation) {
  EXPECT_EQ(segment("Who'd park the van there?"), (std::vector<std::string>{"who'd", "park", "the", "van", "there", "?"}));
  EXPECT_EQ(segment("  Wait...  OK!"), (std::vector<std::string>{"wait", ".", ".", ".", "ok", "!"}));
  EXPECT_EQ(segment("'quoted' rock'n'roll"), (std::vector<std::string>{"'", "quoted", "'", "rock'n'roll"}));
  EXPECT_TRUE(segment("").empty());
  EXPECT_TRUE(segment("   \t").empty());
  EXPECT_EQ(normalize("  Hi There "), "hi there");
}

TEST(Vocabulary, ReservedIdsAndRoundTrip) {
  auto vocab = Vocabulary::build({"Who'd park the van there?", "the van did that"});
  EXPECT_EQ(vocab.token_of(Vocabulary::pad_id()), "<pad>");
  EXPECT_EQ(vocab.token_of(Vocabulary::cls_id()), "<cls>");
  EXPECT_EQ(vocab.token_of(Vocabulary::mask_id()), "<mask>");
  EXPECT_EQ(vocab.token_of(vocab.speaker_id(0)), "<s_1>");
  EXPECT_EQ(vocab.token_of(vocab.speaker_id(8)), "<s_9>");
  EXPECT_THROW(vocab.speaker_id(9), CapacityError);
  // Most frequent words first, ties lexicographic.
  EXPECT_EQ(vocab.token_of(vocab.reserved_count()), "the");
  EXPECT_EQ(vocab.token_of(vocab.reserved_count() + 1), "van");

  auto ids = vocab.tokenize("Who'd park the van there?");
  EXPECT_EQ(vocab.decode(ids), (std::vector<std::string>{"who'd", "park", "the", "van", "there", "?"}));
  EXPECT_EQ(vocab.tokenize("unseen words")[0], Vocabulary::unk_id());

  const auto reloaded = Vocabulary::parse(vocab.serialize());
  EXPECT_EQ(reloaded, vocab);
  EXPECT_EQ(reloaded.speaker_pool(), 9u);
}

TEST(Vocabulary, FileRejectsMovedReservedTokens) {
  EXPECT_THROW(Vocabulary::parse("<pad>\n"), FormatError);
  EXPECT_THROW(Vocabulary::parse("#compm-vocab v1 speakers=2\n<unk>\n<pad>\n<cls>\n<mask>\n<s_1>\n<s_2>\n"),
               FormatError);
  EXPECT_THROW(Vocabulary::parse("#compm-vocab v1 speakers=2\n<pad>\n<unk>\n"), FormatError);
  EXPECT_NO_THROW(Vocabulary::parse("#compm-vocab v1 speakers=2\n<pad>\n<unk>\n<cls>\n<mask>\n<s_1>\n<s_2>\nhi\n"));
}

TEST(Corpus, ParsesTwoTurnDialogue) {
  const auto tax = LabelTaxonomy::builtin("meld_emotion");
  const auto corpus =
      parse_corpus(line("d1", 0, "Ross", "Who'd park the van there?", "neutral") + line("d1", 1, "Mona", "Stop it!", "anger"), &tax);
  ASSERT_EQ(corpus.size(), 1u);
  EXPECT_EQ(corpus[0].size(), 2u);
  EXPECT_EQ(corpus[0].participants(), (std::vector<std::string>{"Ross", "Mona"}));
}

TEST(Corpus, ResortsTurnsAgainstSortOracle) {
  std::vector<long long> turns{0, 1, 2, 3, 4, 5, 6, 7};
  std::mt19937 engine(3);
  std::shuffle(turns.begin(), turns.end(), engine);
  std::string text;
  for (auto t : turns) text += line("c", t, t % 2 ? "a" : "b", "utterance " + std::to_string(t), "joy");
  auto expected = turns;
  std::sort(expected.begin(), expected.end());
  const auto corpus = parse_corpus(text);
  ASSERT_EQ(corpus.size(), 1u);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(corpus[0].utterances[i].turn, expected[i]);
    EXPECT_EQ(corpus[0].utterances[i].text, "utterance " + std::to_string(expected[i]));
  }
}

TEST(Corpus, RejectsBadInput) {
  const auto tax = LabelTaxonomy::builtin("meld_emotion");
  try {
    parse_corpus(line("c", 0, "a", "hi", "joy") + line("c", 0, "b", "hello", "joy"));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    parse_corpus(line("c", 0, "a", "hi", "ecstatic"), &tax);
    FAIL();
  } catch (const TaxonomyError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ecstatic"), std::string::npos);
    EXPECT_NE(msg.find("anger, disgust, sadness, joy, surprise, fear, neutral"), std::string::npos);
  }
  EXPECT_THROW(parse_corpus("{\"conv_id\": \"c\", \"turn\": 0}\n"), FormatError);
  EXPECT_THROW(parse_corpus("not json\n"), FormatError);
  EXPECT_THROW(parse_corpus(line("c", 0, "a", "   ", "joy")), FormatError);
}

TEST(Corpus, AcceptsMissingLabelsAndMonologues) {
  const auto corpus = parse_corpus(R"({"conv_id": 7, "turn": 0, "speaker": "a", "text": "hello"})" "\n");
  ASSERT_EQ(corpus.size(), 1u);
  EXPECT_EQ(corpus[0].id, "7");
  EXPECT_FALSE(corpus[0].utterances[0].label.has_value());
}

TEST(Corpus, SerializeLoadRoundTrip) {
  std::vector<Conversation> corpus{six_turn_dialogue()};
  corpus.push_back({"other", {{3, "x", "fine", std::nullopt}, {9, "y", "\"quoted\" text", "sadness"}}});
  EXPECT_EQ(parse_corpus(serialize_corpus(corpus)), corpus);
  const auto path = std::filesystem::temp_directory_path() / "compm_corpus_test.jsonl";
  save_corpus(path, corpus);
  EXPECT_EQ(load_corpus(path), corpus);
  std::filesystem::remove(path);
}

TEST(Speakers, AssignedByFirstAppearance) {
  Conversation dyadic{"d", {{0, "zed", "a", {}}, {1, "amy", "b", {}}, {2, "zed", "c", {}}}};
  const auto slots = assign_speaker_tokens(dyadic, 9);
  EXPECT_EQ(slots.size(), 2u);
  EXPECT_EQ(slots.at("zed"), 0u);  // not lexicographic
  EXPECT_EQ(slots.at("amy"), 1u);
  EXPECT_EQ(assign_speaker_tokens(dyadic, 9), slots);

  const auto fig2 = assign_speaker_tokens(six_turn_dialogue(), 9);
  EXPECT_EQ(fig2.at("A"), 0u);
  EXPECT_EQ(fig2.at("B"), 1u);
  EXPECT_EQ(fig2.at("C"), 2u);
  EXPECT_THROW(assign_speaker_tokens(six_turn_dialogue(), 2), CapacityError);
}

TEST(Context, LayoutAndSpeakerTokens) {
  const auto conv = six_turn_dialogue();
  const auto vocab = Vocabulary::build(utterance_texts({conv}));
  const auto first = assemble_context(vocab, conv, 0, 512);
  EXPECT_EQ(first.ids.size(), 2 + vocab.tokenize(conv.utterances[0].text).size());
  EXPECT_EQ(first.ids[0], Vocabulary::cls_id());
  EXPECT_EQ(first.ids[1], vocab.speaker_id(0));

  const auto full = assemble_context(vocab, conv, 5, 512);
  const auto speaker_tokens = std::count_if(full.ids.begin(), full.ids.end(), [&](TokenId id) { return vocab.is_speaker(id); });
  EXPECT_EQ(speaker_tokens, 6);
  std::set<TokenId> distinct;
  for (auto id : full.ids)
    if (vocab.is_speaker(id)) distinct.insert(id);
  EXPECT_EQ(distinct.size(), 3u);
  EXPECT_EQ(full.mask, std::vector<std::uint8_t>(full.ids.size(), 1));
}

TEST(Context, PrefixExtensionWithoutTruncation) {
  const auto conv = six_turn_dialogue();
  const auto vocab = Vocabulary::build(utterance_texts({conv}));
  for (std::size_t t = 1; t < conv.size(); ++t) {
    const auto prev = assemble_context(vocab, conv, t - 1, 512).ids;
    const auto cur = assemble_context(vocab, conv, t, 512).ids;
    ASSERT_GT(cur.size(), prev.size());
    EXPECT_TRUE(std::equal(prev.begin(), prev.end(), cur.begin()));
  }
}

TEST(Context, TruncationDropsWholeEarlyTurns) {
  const auto conv = six_turn_dialogue();
  const auto vocab = Vocabulary::build(utterance_texts({conv}));
  const auto encoded = encode_conversation(vocab, conv);
  const auto full = assemble_context(vocab, encoded, 5, 512);
  const std::size_t limit = full.ids.size() - 1;  // one token too many: u_1 must go
  const auto cut = assemble_context(vocab, encoded, 5, limit);
  EXPECT_EQ(cut.first_turn, 1u);

  // Re-assembly oracle: the same conversation without its first turn.
  Conversation tail = conv;
  tail.utterances.erase(tail.utterances.begin());
  auto tail_encoded = encode_conversation(vocab, tail);
  tail_encoded.speakers = std::vector<std::size_t>(encoded.speakers.begin() + 1, encoded.speakers.end());
  EXPECT_EQ(cut.ids, assemble_context(vocab, tail_encoded, 4, 512).ids);
  EXPECT_LE(cut.ids.size(), limit);
}

TEST(Context, OverlongCurrentTurnKeepsItsTail) {
  Conversation conv{"long", {{0, "a", "one two three four five six", "joy"}}};
  const auto vocab = Vocabulary::build(utterance_texts({conv}));
  const auto ctx = assemble_context(vocab, conv, 0, 5);
  EXPECT_TRUE(ctx.current_truncated);
  EXPECT_EQ(vocab.decode(ctx.ids), (std::vector<std::string>{"<cls>", "<s_1>", "four", "five", "six"}));
  EXPECT_THROW(assemble_context(vocab, conv, 1, 5), ArgumentError);
}

TEST(Taxonomy, EmoryNlpSentimentGrouping) {
  const auto tax = LabelTaxonomy::builtin("emorynlp_emotion");
  EXPECT_EQ(map_to_sentiment(tax, "joyful"), "positive");
  EXPECT_EQ(map_to_sentiment(tax, "neutral"), "neutral");
  EXPECT_EQ(map_to_sentiment(tax, "mad"), "negative");
  EXPECT_THROW(map_to_sentiment(tax, "bored"), TaxonomyError);
  EXPECT_THROW(map_to_sentiment(LabelTaxonomy::builtin("iemocap"), "happy"), TaxonomyError);

  std::set<std::string> image;
  for (const auto& c : tax.classes) image.insert(map_to_sentiment(tax, c));
  EXPECT_EQ(image, (std::set<std::string>{"positive", "negative", "neutral"}));
  EXPECT_EQ(tax.grouped().classes, (std::vector<std::string>{"positive", "negative", "neutral"}));
}

TEST(Taxonomy, ProfilesAndJson) {
  EXPECT_EQ(LabelTaxonomy::builtin("meld_emotion").size(), 7u);
  EXPECT_EQ(LabelTaxonomy::builtin("meld_sentiment").size(), 3u);
  EXPECT_EQ(LabelTaxonomy::builtin("iemocap").size(), 6u);
  const auto dd = LabelTaxonomy::builtin("dailydialog");
  EXPECT_EQ(dd.size(), 7u);
  EXPECT_EQ(dd.excluded, (std::set<std::string>{"neutral"}));
  EXPECT_EQ(dd.headline, HeadlineMetric::MicroF1);
  EXPECT_EQ(LabelTaxonomy::from_json(dd.to_json()).classes, dd.classes);
  EXPECT_THROW(LabelTaxonomy::builtin("nope"), TaxonomyError);
  EXPECT_THROW(LabelTaxonomy::from_json({{"classes", {"a", "b"}}, {"grouping", {{"a", "x"}}}}), TaxonomyError);
  EXPECT_THROW(LabelTaxonomy::from_json({{"classes", {"a", "a"}}}), TaxonomyError);
}

std::vector<Conversation> numbered(std::size_t n) {
  std::vector<Conversation> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({std::to_string(i), {{0, "a", "x", {}}, {1, "b", "y", {}}}});
  return out;
}

TEST(Subsample, CountsAndReproducibility) {
  const auto corpus = numbered(10);
  EXPECT_EQ(subsample_training(corpus, 1.0, 5), corpus);
  const auto a = subsample_training(corpus, 0.6, 42);
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(subsample_training(corpus, 0.6, 42), a);
  EXPECT_EQ(subsample_training(corpus, 0.8, 1).size(), 8u);
  EXPECT_THROW(subsample_training(corpus, 0.0, 1), ArgumentError);
  EXPECT_THROW(subsample_training(corpus, 1.5, 1), ArgumentError);
}

TEST(Subsample, SeedsSpreadOverAllSubsets) {
  // 3 of 5 conversations: C(5,3) = 10 possible subsets, enumerated exhaustively.
  const auto corpus = numbered(5);
  std::set<std::string> all;
  for (unsigned mask = 0; mask < 32; ++mask) {
    if (__builtin_popcount(mask) != 3) continue;
    std::string key;
    for (int i = 0; i < 5; ++i)
      if (mask & (1u << i)) key += std::to_string(i);
    all.insert(key);
  }
  ASSERT_EQ(all.size(), 10u);

  std::map<std::string, int> hits;
  std::string previous;
  int differs = 0;
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    std::string key;
    for (const auto& c : subsample_training(corpus, 0.6, static_cast<std::uint64_t>(seed))) key += c.id;
    ASSERT_TRUE(all.count(key)) << key;
    ++hits[key];
    if (seed > 0 && key != previous) ++differs;
    previous = key;
  }
  EXPECT_EQ(hits.size(), all.size());
  for (const auto& [key, count] : hits) EXPECT_GT(count, 50) << key;  // uniform would be 100
  EXPECT_GT(differs, static_cast<int>(0.8 * (seeds - 1)));            // collision rate ~1/10
}

}  // namespace
}  // namespace compm::data
