#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "compm/app/commands.hpp"
#include "compm/errors.hpp"
#include "compm/model/compm_model.hpp"
#include "compm/train/evaluate.hpp"
#include "compm/util/atomic_file.hpp"
#include "synthetic.hpp"

namespace compm::app {
namespace {

namespace fs = std::filesystem;

class AppTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "compm_app_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto d = test::keyword_corpus(30, 20, 21);
    data::save_corpus(dir_ / "train.jsonl", d.train);
    data::save_corpus(dir_ / "dev.jsonl", std::vector<data::Conversation>(d.dev.begin(), d.dev.begin() + 10));
    data::save_corpus(dir_ / "test.jsonl", std::vector<data::Conversation>(d.dev.begin() + 10, d.dev.end()));
    write_file_atomic(dir_ / "empty.jsonl", "");
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  void TearDown() override { Tape::current().clear(); }

  static nlohmann::json base_config() {
    return nlohmann::json::parse(R"({
      "data": {"train": "train.jsonl", "dev": "dev.jsonl", "test": "test.jsonl"},
      "taxonomy": "meld_emotion",
      "variant": "CoM_only",
      "model": {
        "context_encoder": {"hidden_dim": 8, "num_heads": 2, "ffn_dim": 16},
        "memory_encoder": {"hidden_dim": 8, "num_heads": 2, "ffn_dim": 16}
      },
      "train": {"epochs": 2, "lr": 0.001},
      "pretrain": {"epochs": 2},
      "seed": 5
    })");
  }

  static RunConfig config_from(const nlohmann::json& j) { return run_config_from_json(j, dir_); }

  static int cli(std::vector<std::string> args, std::string* output = nullptr) {
    args.insert(args.begin(), "compm");
    args.push_back("--quiet");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out);
    if (output) *output = out.str();
    return code;
  }

  static nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

  static inline fs::path dir_;
};

TEST_F(AppTest, StatsCountsSplitsAndToleratesEmptyInput) {
  std::ostringstream out;
  EXPECT_EQ(cmd_stats({{"train", dir_ / "train.jsonl"}, {"empty", dir_ / "empty.jsonl"}},
                      data::LabelTaxonomy::builtin("meld_emotion"), true, out),
            kExitOk);
  const auto j = nlohmann::json::parse(out.str());
  const auto corpus = data::load_corpus(dir_ / "train.jsonl");
  std::size_t utterances = 0;
  for (const auto& c : corpus) utterances += c.utterances.size();
  EXPECT_EQ(j[0]["dialogues"], corpus.size());
  EXPECT_EQ(j[0]["utterances"], utterances);
  EXPECT_EQ(j[1]["dialogues"], 0);
  EXPECT_EQ(j[1]["utterances"], 0);
}

TEST_F(AppTest, StatsCountsCorpusOfKnownShape) {
  // 1038 dialogues holding 9989 utterances, the layout of a full-size emotion training split.
  std::string jsonl;
  std::size_t written = 0;
  for (std::size_t d = 0; d < 1038; ++d) {
    const std::size_t turns = 9 + (d < 9989 - 9 * 1038 ? 1 : 0);
    for (std::size_t t = 0; t < turns; ++t, ++written) {
      jsonl += R"({"conv_id": ")" + std::to_string(d) + R"(", "turn": )" + std::to_string(t) + R"(, "speaker": "s)" +
               std::to_string(t % 3) + R"(", "text": "ok", "label": "neutral"})" + "\n";
    }
  }
  ASSERT_EQ(written, 9989u);
  write_file_atomic(dir_ / "shaped.jsonl", jsonl);
  std::string text;
  ASSERT_EQ(cli({"stats", "train=" + (dir_ / "shaped.jsonl").string(), "--taxonomy", "meld_emotion", "--json"}, &text),
            kExitOk);
  const auto row = nlohmann::json::parse(text)[0];
  EXPECT_EQ(row["split"], "train");
  EXPECT_EQ(row["dialogues"], 1038);
  EXPECT_EQ(row["utterances"], 9989);
}

TEST_F(AppTest, ConfigRejectsUnknownKeysAndMissingPieces) {
  auto j = base_config();
  j["epochz"] = 3;
  EXPECT_THROW(config_from(j), ConfigError);

  j = base_config();
  j["model"]["context_encoder"]["hidden"] = 8;
  EXPECT_THROW(config_from(j), ConfigError);

  j = base_config();
  j["variant"] = "CoMPM";
  EXPECT_THROW(config_from(j).validate(), ConfigError);  // needs a pretrained checkpoint

  j = base_config();
  j["data"]["train"] = "missing.jsonl";
  EXPECT_THROW(config_from(j).validate(), ConfigError);

  j = base_config();
  j["model"].erase("context_encoder");
  EXPECT_THROW(config_from(j).validate(), ConfigError);

  j = base_config();
  j["train_fraction"] = 1.5;
  EXPECT_THROW(config_from(j).validate(), ConfigError);
  EXPECT_NO_THROW(config_from(base_config()).validate());
}

TEST_F(AppTest, SeedEnvironmentOverride) {
  write_file_atomic(dir_ / "seeded.json", base_config().dump());
  ::setenv("COMPM_SEED", "123", 1);
  EXPECT_EQ(load_run_config(dir_ / "seeded.json").seed, 123u);
  ::setenv("COMPM_SEED", "x1", 1);
  EXPECT_THROW(load_run_config(dir_ / "seeded.json"), ConfigError);
  ::unsetenv("COMPM_SEED");
  EXPECT_EQ(load_run_config(dir_ / "seeded.json").seed, 5u);
}

TEST_F(AppTest, ExitCodes) {
  EXPECT_EQ(cli({"bogus"}), kExitUsage);
  EXPECT_EQ(cli({"train", "--config", (dir_ / "nope.json").string()}), kExitUsage);
  write_file_atomic(dir_ / "bad.jsonl", "{\"conv_id\": 1, \"turn\": 0}\n");
  EXPECT_EQ(cli({"stats", (dir_ / "bad.jsonl").string()}), kExitData);
  EXPECT_EQ(exit_code_for(NumericError("x")), kExitNumeric);
  EXPECT_EQ(exit_code_for(CapacityError("x")), kExitData);
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitUsage);
}

TEST_F(AppTest, TrainComOnlyHasNoMemoryParameters) {
  std::ostringstream out;
  TrainOverrides o;
  o.out = dir_ / "com_only";
  o.train_fraction = 0.6;
  ASSERT_EQ(cmd_train(config_from(base_config()), o, out), kExitOk);
  const auto ckpt = nn::load_checkpoint(dir_ / "com_only" / "run1" / "best.ckpt");
  for (const auto& [name, array] : ckpt.arrays) EXPECT_NE(name.rfind("pm.", 0), 0u) << name;
  const auto record = read_json(dir_ / "com_only" / "run_record.json");
  EXPECT_EQ(record["train_conversations"], 18);  // ceil(0.6 * 30)
  EXPECT_EQ(record["runs"][0]["epochs"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "com_only" / "config.json"));
  EXPECT_TRUE(fs::exists(dir_ / "com_only" / "vocab.txt"));
}

TEST_F(AppTest, SameSeedSameRunRecordLosses) {
  std::vector<nlohmann::json> losses;
  for (const char* name : {"same_a", "same_b"}) {
    std::ostringstream out;
    TrainOverrides o;
    o.out = dir_ / name;
    ASSERT_EQ(cmd_train(config_from(base_config()), o, out), kExitOk);
    losses.push_back(read_json(dir_ / name / "run_record.json")["runs"][0]["step_losses"]);
  }
  EXPECT_EQ(losses[0].dump(), losses[1].dump());
}

TEST_F(AppTest, PretrainThenTrainJointVariant) {
  auto j = base_config();
  std::ostringstream out;
  ASSERT_EQ(cmd_pretrain(config_from(j), dir_ / "pre", out), kExitOk);
  ASSERT_TRUE(fs::exists(dir_ / "pre" / "pretrained.ckpt"));
  j["variant"] = "CoMPM_frozen";
  j["pretrained_checkpoint"] = "pre/pretrained.ckpt";
  TrainOverrides o;
  o.out = dir_ / "frozen";
  ASSERT_EQ(cmd_train(config_from(j), o, out), kExitOk);

  const auto pre = nn::load_checkpoint(dir_ / "pre" / "pretrained.ckpt");
  const auto best = nn::load_checkpoint(dir_ / "frozen" / "run1" / "best.ckpt");
  std::size_t compared = 0;
  for (const auto& [name, array] : best.arrays) {
    if (name.rfind("pm.", 0) != 0) continue;
    EXPECT_EQ(array.values, pre.arrays.at("encoder" + name.substr(2)).values) << name;
    ++compared;
  }
  EXPECT_GT(compared, 0u);

  j["model"]["memory_encoder"]["hidden_dim"] = 12;
  j["model"]["memory_encoder"]["num_heads"] = 3;
  EXPECT_THROW(cmd_train(config_from(j), o, out), ConfigError);
}

TEST_F(AppTest, EvalMatchesLibraryAndCountingOracle) {
  std::ostringstream out;
  TrainOverrides o;
  o.out = dir_ / "for_eval";
  ASSERT_EQ(cmd_train(config_from(base_config()), o, out), kExitOk);
  const auto ckpt = (dir_ / "for_eval" / "run1" / "best.ckpt").string();
  const auto test_path = (dir_ / "test.jsonl").string();

  std::string report_text;
  ASSERT_EQ(cli({"eval", "--checkpoint", ckpt, test_path, "--json", "--threads", "2"}, &report_text), kExitOk);
  const auto report = nlohmann::json::parse(report_text);

  const auto model = model::CompmModel::load(ckpt);
  const auto taxonomy = data::LabelTaxonomy::builtin("meld_emotion");
  const auto corpus = data::load_corpus(test_path, &taxonomy);
  const auto library = train::evaluate(model, data::encode_corpus(model.vocabulary(), corpus, &taxonomy), taxonomy);
  EXPECT_EQ(report, library.to_json());

  std::string predictions;
  ASSERT_EQ(cli({"predict", "--checkpoint", ckpt, test_path, "--json"}, &predictions), kExitOk);
  std::vector<std::vector<std::size_t>> counts(7, std::vector<std::size_t>(7, 0));
  std::size_t row = 0;
  const auto rows = nlohmann::json::parse(predictions);
  for (const auto& conv : corpus) {
    for (const auto& u : conv.utterances) {
      ++counts[taxonomy.index_of(*u.label)][taxonomy.index_of(rows[row++]["predicted"].get<std::string>())];
    }
  }
  EXPECT_EQ(row, rows.size());
  EXPECT_EQ(report["confusion"], nlohmann::json(counts));

  EXPECT_EQ(cli({"eval", "--checkpoint", ckpt, test_path, "--taxonomy", "meld_sentiment"}), kExitUsage);
}

TEST_F(AppTest, EvalPerfectOracleScoresOne) {
  // Five utterances all labeled joy; a head whose bias favours joy is a perfect oracle here.
  std::string jsonl;
  for (int t = 0; t < 5; ++t) {
    jsonl += R"({"conv_id": "toy", "turn": )" + std::to_string(t) + R"(, "speaker": "s)" + std::to_string(t % 2) +
             R"(", "text": "what a day", "label": "joy"})" + "\n";
  }
  write_file_atomic(dir_ / "toy.jsonl", jsonl);
  const auto taxonomy = data::LabelTaxonomy::builtin("meld_emotion");
  auto config = config_from(base_config()).model_config();
  model::CompmModel m(config, data::Vocabulary::build({"what a day"}), 3);
  for (const auto& p : m.parameters()) {
    if (p.name == "w_o.bias") {
      Tensor b = p.tensor;
      b.mutable_data()[taxonomy.index_of("joy")] = 50.0;
    }
  }
  m.save(dir_ / "oracle.ckpt", {{"taxonomy", taxonomy.to_json()}});
  std::string text;
  ASSERT_EQ(cli({"eval", "--checkpoint", (dir_ / "oracle.ckpt").string(), (dir_ / "toy.jsonl").string(), "--json"},
                &text),
            kExitOk);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(text)["weighted_f1"].get<double>(), 1.0);
}

TEST_F(AppTest, PredictTwoTurnExchange) {
  const auto taxonomy = data::LabelTaxonomy::builtin("meld_emotion");
  auto config = config_from(base_config()).model_config();
  const auto vocab = data::Vocabulary::build({"where did you park the van ?", "out back"}, 2);
  model::CompmModel m(config, vocab, 4);
  m.save(dir_ / "predict.ckpt", {{"taxonomy", taxonomy.to_json()}});
  write_file_atomic(dir_ / "exchange.jsonl",
                    R"({"conv_id": "f1", "turn": 1, "speaker": "Ross", "text": "Where did you park the van?"})"
                    "\n"
                    R"({"conv_id": "f1", "turn": 2, "speaker": "Mona", "text": "Out back!"})"
                    "\n");
  const auto ckpt = (dir_ / "predict.ckpt").string();
  const auto input = (dir_ / "exchange.jsonl").string();
  std::string first, second;
  ASSERT_EQ(cli({"predict", "--checkpoint", ckpt, input, "--json"}, &first), kExitOk);
  ASSERT_EQ(cli({"predict", "--checkpoint", ckpt, input, "--json"}, &second), kExitOk);
  EXPECT_EQ(first, second);
  const auto rows = nlohmann::json::parse(first);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    double total = 0.0;
    for (const auto& [name, p] : r["probabilities"].items()) total += p.get<double>();
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  std::string single;
  ASSERT_EQ(cli({"predict", "--checkpoint", ckpt, input, "--turn", "2", "--json"}, &single), kExitOk);
  EXPECT_EQ(nlohmann::json::parse(single).size(), 1u);
  EXPECT_EQ(cli({"predict", "--checkpoint", ckpt, input, "--turn", "3"}), kExitUsage);

  write_file_atomic(dir_ / "crowd.jsonl",
                    R"({"conv_id": "c", "turn": 0, "speaker": "a", "text": "i know"})"
                    "\n"
                    R"({"conv_id": "c", "turn": 1, "speaker": "b", "text": "i know"})"
                    "\n"
                    R"({"conv_id": "c", "turn": 2, "speaker": "c", "text": "i know"})"
                    "\n");
  EXPECT_EQ(cli({"predict", "--checkpoint", ckpt, (dir_ / "crowd.jsonl").string()}), kExitData);
}

}  // namespace
}  // namespace compm::app
