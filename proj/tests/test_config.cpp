#include <gtest/gtest.h>

#include <cstdlib>

#include "fixture.hpp"
#include "tryw/config.hpp"
#include "tryw/error.hpp"
#include "tryw/pipeline.hpp"

using namespace tryw;
namespace fs = std::filesystem;

TEST(ConfigDocument, ParsesScalarsSectionsAndComments) {
  const auto doc = ConfigDocument::parse(
      "# leading comment\n"
      "top = 1\n"
      "[run]\n"
      "steps = 50   # trailing comment\n"
      "eta = 0.5\n"
      "small = -2.5e-3\n"
      "flag = true\n"
      "off = false\n"
      "name = \"a \\\"quoted\\\" \\\\ # not a comment\"\n"
      "list = [\"a.png\", \"b.png\"]\n"
      "empty = []\n");
  EXPECT_EQ(doc.get_int("top"), 1);
  EXPECT_EQ(doc.get_int("run.steps"), 50);
  EXPECT_DOUBLE_EQ(*doc.get_double("run.eta"), 0.5);
  EXPECT_DOUBLE_EQ(*doc.get_double("run.small"), -2.5e-3);
  EXPECT_EQ(doc.get_bool("run.flag"), true);
  EXPECT_EQ(doc.get_bool("run.off"), false);
  EXPECT_EQ(*doc.get_string("run.name"), "a \"quoted\" \\ # not a comment");
  EXPECT_EQ(*doc.get_string_list("run.list"), (std::vector<std::string>{"a.png", "b.png"}));
  EXPECT_TRUE(doc.get_string_list("run.empty")->empty());
  EXPECT_FALSE(doc.has("steps"));
  EXPECT_FALSE(doc.get_int("run.missing").has_value());
}

TEST(ConfigDocument, IntegersWidenToDoubles) {
  const auto doc = ConfigDocument::parse("x = 3\n");
  EXPECT_DOUBLE_EQ(*doc.get_double("x"), 3.0);
}

TEST(ConfigDocument, TypeMismatchesThrow) {
  const auto doc = ConfigDocument::parse("s = \"x\"\ni = 2\nf = 1.5\n");
  EXPECT_THROW(doc.get_int("s"), ValidationError);
  EXPECT_THROW(doc.get_int("f"), ValidationError);
  EXPECT_THROW(doc.get_string("i"), ValidationError);
  EXPECT_THROW(doc.get_bool("i"), ValidationError);
  EXPECT_THROW(doc.get_string_list("s"), ValidationError);
}

TEST(ConfigDocument, MalformedInputNamesTheLine) {
  for (const char* bad : {"x = \"open\n", "x = \n", "x = 1 2\n", "[run\n", "= 3\n",
                          "x = 1\nx = 2\n", "x = 1.2.3\n", "x = \"\\q\"\n"}) {
    try {
      ConfigDocument::parse(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
    }
  }
}

TEST(ConfigDocument, MissingFileThrows) {
  EXPECT_THROW(ConfigDocument::load("/nonexistent/job.toml"), ValidationError);
}

class JobConfigTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tryw_config_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  JobConfig load_with(const std::string& extra) {
    return JobConfig::load(fixture::write_job(dir_, extra).config);
  }

  fs::path dir_;
};

TEST_F(JobConfigTest, ResolvesPathsAgainstTheConfigDirectory) {
  const JobConfig c = load_with("");
  EXPECT_EQ(c.person_image, dir_ / "person.png");
  EXPECT_EQ(c.person_iuv.v, dir_ / "person_iuv_v.png");
  EXPECT_EQ(c.output_dir, dir_ / "out");
  EXPECT_EQ(c.steps, 10);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.mode, BackboneMode::Toy);
  EXPECT_EQ(c.category, GarmentKind::Upper);
  EXPECT_NO_THROW(c.validate());
}

TEST_F(JobConfigTest, DefaultsMatchTheDocumentedValues) {
  const JobConfig c = load_with("");
  EXPECT_EQ(c.codebook_size, 64);
  EXPECT_DOUBLE_EQ(c.eta, 1.0);
  EXPECT_DOUBLE_EQ(c.margin, 0.3);
  EXPECT_DOUBLE_EQ(c.tau_uv, 0.02);
  EXPECT_DOUBLE_EQ(c.mask_threshold, 0.5);
  EXPECT_EQ(c.guidance.kind, GuidanceKind::Principal);
  EXPECT_EQ(c.guidance.components, 3);
}

TEST_F(JobConfigTest, ReadsGuidanceAndGeometryKeys) {
  const JobConfig c = load_with(
      "guidance = \"lowfreq\"\nlowfreq_cutoff = 0.4\neta = 0\ncodebook_size = 16\n"
      "[geometry]\nmargin = 0.25\ntau_uv = 0.05\nmask_threshold = 0.4\n");
  EXPECT_EQ(c.guidance.kind, GuidanceKind::LowFrequency);
  EXPECT_DOUBLE_EQ(c.guidance.cutoff, 0.4);
  EXPECT_DOUBLE_EQ(c.eta, 0.0);
  EXPECT_EQ(c.codebook_size, 16);
  EXPECT_DOUBLE_EQ(c.margin, 0.25);
  EXPECT_DOUBLE_EQ(c.tau_uv, 0.05);
  EXPECT_DOUBLE_EQ(c.mask_threshold, 0.4);
  EXPECT_NO_THROW(c.validate());
}

TEST_F(JobConfigTest, UnknownKeysAreRejected) {
  try {
    load_with("stepz = 3\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("run.stepz"), std::string::npos);
  }
}

TEST_F(JobConfigTest, BadValuesFailValidation) {
  EXPECT_THROW(load_with("eta = 1.5\n").validate(), ValidationError);
  EXPECT_THROW(load_with("codebook_size = 0\n").validate(), ValidationError);
  EXPECT_THROW(load_with("m = 4\n").validate(), ValidationError);
  EXPECT_THROW(load_with("guidance = \"lowfreq\"\nlowfreq_cutoff = 0\n").validate(),
               ValidationError);
  EXPECT_THROW(load_with("guidance = \"sideways\"\n"), ValidationError);
}

TEST_F(JobConfigTest, StepsBelowOneFailValidation) {
  JobConfig c = load_with("");
  c.steps = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.steps = 1;
  EXPECT_NO_THROW(c.validate());
}

TEST(JobConfigDocument, RejectsBadRunScalars) {
  const fs::path base = "/tmp";
  auto parse = [&](const std::string& text) {
    return JobConfig::from_document(ConfigDocument::parse(text), base);
  };
  EXPECT_THROW(parse("[run]\nseed = -1\n"), ValidationError);
  EXPECT_THROW(parse("[run]\ncategory = \"hat\"\n"), Error);
  EXPECT_THROW(parse("[run]\nmode = \"warp\"\n"), Error);
  const JobConfig c = parse("[run]\ncategory = \"dress\"\nseed = 3\n");
  EXPECT_EQ(c.category, GarmentKind::Dress);
  EXPECT_EQ(c.seed, 3u);
}

TEST_F(JobConfigTest, MissingInputNamesThePath) {
  const JobConfig c = load_with("");
  fs::remove(dir_ / "person_keypoints.json");
  try {
    c.validate();
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("person keypoints"), std::string::npos) << msg;
    EXPECT_NE(msg.find("person_keypoints.json"), std::string::npos) << msg;
  }
}

TEST_F(JobConfigTest, BridgeModesNeedACommand) {
  JobConfig c = load_with("");
  c.mode = BackboneMode::BridgeUnet;
  ::unsetenv("TRYW_BRIDGE_CMD");
  EXPECT_THROW(c.validate(), ValidationError);
  ::setenv("TRYW_BRIDGE_CMD", "/bin/true", 1);
  EXPECT_NO_THROW(c.validate());
  ::unsetenv("TRYW_BRIDGE_CMD");
  c.mode = BackboneMode::BridgeDit;
  c.bridge_command = "/bin/true";
  EXPECT_NO_THROW(c.validate());
  // Channel count is unknown until the handshake, so only m >= 1 is checked.
  c.guidance = GuidanceMode::principal(16);
  EXPECT_NO_THROW(c.validate());
  c.guidance = GuidanceMode::principal(0);
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST_F(JobConfigTest, JsonFingerprintTracksEveryField) {
  const JobConfig a = load_with("");
  JobConfig b = a;
  EXPECT_EQ(a.to_json(), b.to_json());
  b.seed = 8;
  EXPECT_NE(a.to_json(), b.to_json());
  b = a;
  b.guidance.components = 2;
  EXPECT_NE(a.to_json(), b.to_json());
  b = a;
  b.tau_uv = 0.03;
  EXPECT_NE(a.to_json(), b.to_json());
}
