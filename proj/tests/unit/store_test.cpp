#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tsevo/store/store.hpp"

using namespace tsevo;
using namespace tsevo::store;
namespace fs = std::filesystem;

namespace {

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tsevo_store_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Skill skill(std::string id, std::optional<std::string> parent, int gen) {
    Skill s = seed_skill();
    s.id = std::move(id);
    s.parent_id = std::move(parent);
    s.generation = gen;
    return s;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(StoreTest, SequencesStartAtOneAndIncrease) {
  auto st = AssetStore::create(dir_, "run-a");
  EXPECT_EQ(st.append_event("generated", {}), 1u);
  EXPECT_EQ(st.append_skill(seed_skill()), 2u);
  EXPECT_EQ(st.write_checkpoint({{"x", 1}}), 3u);
  EXPECT_EQ(st.append(RecordKind::capsule, {{"y", 2}}), 4u);
  EXPECT_THROW(AssetStore::create(dir_, "run-b"), StorageError);
}

TEST_F(StoreTest, ReloadIsByteIdentical) {
  nlohmann::json payload{{"skill", skill("g1", "seed", 1)}, {"fitness", 1.0 / 3.0}, {"metrics", {{"q", 1e-17}}}};
  {
    auto st = AssetStore::create(dir_, "run-a");
    st.append(RecordKind::capsule, payload);
  }
  const auto st = AssetStore::open(dir_);
  ASSERT_EQ(st.records(RecordKind::capsule).size(), 1u);
  const auto back = st.records(RecordKind::capsule)[0].payload;
  EXPECT_EQ(back.dump(), payload.dump());
  EXPECT_EQ(nlohmann::json::parse(back.dump()).dump(), back.dump());
  EXPECT_EQ(st.run_id(), "run-a");
  EXPECT_EQ(st.last_seq(), 1u);
}

TEST_F(StoreTest, Lineage) {
  auto st = AssetStore::create(dir_, "run-a");
  st.append_skill(skill("seed", std::nullopt, 0));
  st.append_skill(skill("g1", "seed", 1));
  st.append_skill(skill("g2", "g1", 2));
  st.append_skill(skill("g3", "g2", 3));
  EXPECT_EQ(st.lineage("seed").size(), 1u);
  const auto chain = st.lineage("g3");
  ASSERT_EQ(chain.size(), 4u);
  EXPECT_EQ(chain[1].generation, 2);
  EXPECT_EQ(chain[3].id, "seed");
  EXPECT_THROW(st.lineage("nope"), UnknownId);
  EXPECT_THROW(st.skill("nope"), UnknownId);
}

TEST_F(StoreTest, LineageCycleIsAnError) {
  auto st = AssetStore::create(dir_, "run-a");
  st.append_skill(skill("a", "b", 1));
  st.append_skill(skill("b", "a", 1));
  EXPECT_THROW(st.lineage("a"), StorageError);
}

TEST_F(StoreTest, TornTailIsIgnored) {
  {
    auto st = AssetStore::create(dir_, "run-a");
    st.append_event("generated", {{"n", 1}});
  }
  std::ofstream(dir_ / "events.jsonl", std::ios::app) << "{\"seq\": 2, \"ru";
  const auto st = AssetStore::open(dir_);
  EXPECT_EQ(st.events().size(), 1u);
}

TEST_F(StoreTest, TruncateDropsLaterRecords) {
  auto st = AssetStore::create(dir_, "run-a");
  st.append_event("generated", {});
  const auto cp = st.write_checkpoint({});
  st.append_event("generated", {});
  st.append_skill(seed_skill());
  st.truncate_to(cp);
  EXPECT_EQ(st.records().size(), 1u);
  EXPECT_EQ(st.append_event("generated", {}), cp + 1);
  EXPECT_EQ(AssetStore::open(dir_).records().size(), 2u);
}

TEST_F(StoreTest, OpenMissingRun) {
  EXPECT_THROW(AssetStore::open(dir_), UnknownRun);
  EXPECT_FALSE(AssetStore::exists(dir_));
}

TEST_F(StoreTest, SessionsAreSeparate) {
  auto st = AssetStore::create(dir_, "run-a");
  st.log_session({{"note", "started"}});
  EXPECT_EQ(st.sessions().size(), 1u);
  EXPECT_TRUE(st.records().empty());
}

TEST(RunId, StableAndDistinct) {
  EXPECT_EQ(derive_run_id({{"a", 1}}), derive_run_id({{"a", 1}}));
  EXPECT_NE(derive_run_id({{"a", 1}}), derive_run_id({{"a", 2}}));
  EXPECT_EQ(derive_run_id({{"a", 1}}).rfind("run-", 0), 0u);
}
