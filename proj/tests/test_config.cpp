#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "condsim/checkpoint.hpp"
#include "condsim/config.hpp"
#include "support.hpp"

using namespace condsim;
using namespace testing_support;

namespace {

RunConfig parse(const std::string& text) {
  RunConfig rc;
  std::istringstream is(text);
  rc.read(is, "test.cfg");
  return rc;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.params().size() != b.params().size()) return false;
  for (std::size_t i = 0; i < a.params().size(); ++i)
    if (a.params()[i].name != b.params()[i].name || a.params()[i].value != b.params()[i].value)
      return false;
  return true;
}

}  // namespace

TEST(RunConfig, DefaultsMatchReferenceSetup) {
  const RunConfig rc;
  EXPECT_EQ(rc.integer("n_instances"), 2000);
  EXPECT_EQ(rc.integer("embed_dim"), 64);
  EXPECT_EQ(rc.integer("epochs"), 90);
  EXPECT_DOUBLE_EQ(rc.real("lambda"), 1e-3);
  EXPECT_EQ(rc.world().dim(), 16);
  EXPECT_EQ(rc.variant(), Variant::disc_set);
  EXPECT_NO_THROW(rc.train());
}

TEST(RunConfig, ParsesCommentsAndWhitespace) {
  const RunConfig rc = parse("# header\n\n  lambda = 0.5  # trailing\nvariant=fusion\n");
  EXPECT_DOUBLE_EQ(rc.real("lambda"), 0.5);
  EXPECT_EQ(rc.variant(), Variant::fusion);
}

TEST(RunConfig, UnknownKeyAndBadLinesReportLocation) {
  try {
    parse("lambda = 1\nlamda = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("just words\n"), ConfigError);
  RunConfig rc;
  EXPECT_THROW(rc.set("nope", "1"), ConfigError);
  EXPECT_THROW(rc.set_assignment("epochs"), ConfigError);
}

TEST(RunConfig, TypedAccessorsRejectGarbage) {
  RunConfig rc;
  rc.set("epochs", "ten");
  EXPECT_THROW(rc.integer("epochs"), ConfigError);
  rc.set("lr", "0.1x");
  EXPECT_THROW(rc.real("lr"), ConfigError);
  rc.set("train_labels", "maybe");
  EXPECT_THROW(rc.flag("train_labels"), ConfigError);
  RunConfig v;
  v.set("variant", "bogus");
  EXPECT_THROW(v.variant(), ConfigError);
  RunConfig o;
  o.set("optimizer", "rmsprop");
  EXPECT_THROW(o.train(), ConfigError);
}

TEST(RunConfig, LaterAssignmentsOverride) {
  RunConfig rc = parse("seed = 3\n");
  rc.set_assignment("seed=9");
  EXPECT_EQ(rc.seed(), 9u);
  rc.set_assignment("sweep_grid = 1,2, 3");
  EXPECT_EQ(rc.list("sweep_grid"), (std::vector<std::string>{"1", "2", "3"}));
}

TEST(RunConfig, ResolvedRoundTripIsStable) {
  RunConfig rc = parse("lambda = 0.01\nn_embeddings = 6\n");
  std::ostringstream a;
  rc.write(a);
  const RunConfig back = parse(a.str());
  std::ostringstream b;
  back.write(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(back.values(), rc.values());
}

TEST(RunConfig, ValidationErrors) {
  RunConfig rc;
  rc.set("n_conditions", "0");
  EXPECT_THROW(rc.world(), ConfigError);
  RunConfig k;
  k.set("n_embeddings", "0");
  EXPECT_THROW(k.model(16), ConfigError);
  RunConfig t;
  t.set("temperature", "0");
  EXPECT_THROW(t.model(16), ConfigError);
  RunConfig s;
  s.set("seed", "-1");
  EXPECT_THROW(s.seed(), ConfigError);
  RunConfig io;
  EXPECT_THROW(io.load("/nonexistent/dir/x.cfg"), IoError);
}

TEST(GenerateData, SeededSplitsAndLabelStripping) {
  RunConfig rc;
  rc.set("n_instances", "100");
  rc.set("train_per_condition", "20");
  rc.set("val_per_condition", "5");
  rc.set("test_per_condition", "5");
  const GeneratedData a = generate_data(rc), b = generate_data(rc);
  EXPECT_TRUE(a.train == b.train);
  EXPECT_TRUE(a.test == b.test);
  EXPECT_EQ(a.train.triplets.size(), 80u);
  EXPECT_EQ(a.train.seed, 11u);
  EXPECT_EQ(a.val.seed, 12u);
  EXPECT_EQ(a.test.seed, 13u);
  EXPECT_EQ(a.train.instances, a.test.instances);
  EXPECT_TRUE(a.train.fully_labeled());
  rc.set("train_labels", "false");
  const GeneratedData u = generate_data(rc);
  EXPECT_FALSE(u.train.fully_labeled());
  EXPECT_TRUE(u.val.fully_labeled());
}

TEST(Checkpoint, RoundTripIsExact) {
  for (auto enc : {EncoderVariant::set2, EncoderVariant::seq3}) {
    const Model m = small_model(enc, 3, 50, 16, 5, 2);
    Checkpoint ck{m, {{"variant", "fusion"}, {"best_epoch", "7"}}};
    const std::string bytes = encode_checkpoint(ck);
    EXPECT_EQ(bytes.substr(0, 8), std::string("CONDSIM\0", 8));
    const Checkpoint back = decode_checkpoint(bytes);
    EXPECT_TRUE(same_params(back.model.params, m.params));
    EXPECT_EQ(back.model.config.encoder, enc);
    EXPECT_EQ(back.model.config.hidden_layers, 2);
    EXPECT_EQ(back.meta.at("variant"), "fusion");
    EXPECT_EQ(back.meta.at("best_epoch"), "7");
    EXPECT_EQ(encode_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, CorruptInputsAreDataErrors) {
  const Model m = small_model(EncoderVariant::set2, 2, 51);
  const std::string bytes = encode_checkpoint({m, {}});
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, cut)), DataError) << cut;
  EXPECT_THROW(decode_checkpoint(bytes + "x"), DataError);
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(wrong_magic), DataError);
  std::string wrong_version = bytes;
  wrong_version[8] = 2;
  EXPECT_THROW(decode_checkpoint(wrong_version), DataError);
}

TEST(Checkpoint, FileRoundTripAndMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "condsim_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();
  const Model m = small_model(EncoderVariant::seq3, 4, 52);
  save_checkpoint({m, {}}, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_TRUE(same_params(back.model.params, m.params));
  // Predictions survive the round trip bit for bit.
  const TripletDataset ds = small_dataset(10, 52);
  EXPECT_EQ(all_diffs(back.model, ds.instances, ds.triplets), all_diffs(m, ds.instances, ds.triplets));
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), IoError);
  std::filesystem::remove_all(dir);
}
