#include "sphcorr/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

namespace sphcorr {
namespace {

ExperimentConfig SmallConfig() {
  ExperimentConfig c;
  c.data.categories = {"bottle", "mug", "box"};
  c.data.train_instances = 9;
  c.data.test_instances = 6;
  c.data.points = 256;
  c.data.shape_points = 1024;
  return c;
}

TEST(GenerateDataset, CountsAndStratifiedSplit) {
  const Dataset ds = generate_dataset(SmallConfig(), 11);
  EXPECT_EQ(ds.train.size(), 9u);
  EXPECT_EQ(ds.test.size(), 6u);
  std::map<ShapeCategory, int> train, test;
  for (const auto& o : ds.train) ++train[o.category];
  for (const auto& o : ds.test) ++test[o.category];
  for (ShapeCategory c : {ShapeCategory::kBottle, ShapeCategory::kMug, ShapeCategory::kBox}) {
    EXPECT_EQ(train[c], 3);
    EXPECT_EQ(test[c], 2);
  }
  std::set<int> ids;
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& o : *split) {
      ids.insert(o.instance);
      EXPECT_EQ(o.points.rows(), 256);
      EXPECT_EQ(static_cast<int>(o.category), static_cast<int>(ShapeCategory::kBottle) + o.instance % 3);
    }
  }
  EXPECT_EQ(ids.size(), 15u);
  EXPECT_EQ(*ids.rbegin(), 14);
}

TEST(GenerateDataset, PosesFollowTheTabletopDistribution) {
  const Dataset ds = generate_dataset(SmallConfig(), 12);
  for (const auto& o : ds.train) {
    EXPECT_NEAR(o.gt.r.matrix().determinant(), 1.0, 1e-12);
    EXPECT_GE(o.gt.t.z(), 0.6);
    EXPECT_LE(o.gt.t.z(), 1.0);
    EXPECT_LE(o.gt.t.head<2>().cwiseAbs().maxCoeff(), 0.1);
    EXPECT_GE(o.gt.s.norm(), 0.15 * 0.5 - 1e-12);
    EXPECT_LE(o.gt.s.norm(), 0.35 + 1e-12);
    // Observed points lie inside the ground-truth box.
    const Points local = (o.points.rowwise() - o.gt.t.transpose()) * o.gt.r.matrix();
    for (int k = 0; k < 3; ++k) EXPECT_LE(local.col(k).cwiseAbs().maxCoeff(), o.gt.s[k] + 1e-9);
  }
}

TEST(GenerateDataset, DeterministicAcrossThreadCounts) {
  const ExperimentConfig c = SmallConfig();
  const std::string a = dataset_jsonl(generate_dataset(c, 13, 1));
  EXPECT_EQ(a, dataset_jsonl(generate_dataset(c, 13, 1)));
  EXPECT_EQ(a, dataset_jsonl(generate_dataset(c, 13, 4)));
  EXPECT_NE(a, dataset_jsonl(generate_dataset(c, 14, 1)));
}

TEST(GenerateDataset, SplitSeedChangesMembershipOnly) {
  ExperimentConfig c = SmallConfig();
  c.data.train_instances = 30;
  c.data.test_instances = 30;
  c.data.points = 64;
  c.data.shape_points = 256;
  const Dataset a = generate_dataset(c, 15);
  c.data.split_seed += 1;
  const Dataset b = generate_dataset(c, 15);
  EXPECT_EQ(a.train.size(), b.train.size());
  std::set<int> ia, ib;
  for (const auto& o : a.train) ia.insert(o.instance);
  for (const auto& o : b.train) ib.insert(o.instance);
  EXPECT_NE(ia, ib);
}

TEST(GenerateDataset, NoCategoriesIsAConfigError) {
  ExperimentConfig c = SmallConfig();
  c.data.categories.clear();
  EXPECT_THROW(generate_dataset(c, 1), ConfigError);
}

TEST(DatasetJsonl, RoundTripIsExact) {
  const Dataset ds = generate_dataset(SmallConfig(), 16);
  const std::string text = dataset_jsonl(ds);
  const Dataset back = parse_dataset_jsonl(text);
  ASSERT_EQ(back.train.size(), ds.train.size());
  ASSERT_EQ(back.test.size(), ds.test.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(back.train[i].points, ds.train[i].points);
    EXPECT_EQ(back.train[i].colors, ds.train[i].colors);
    EXPECT_EQ(back.train[i].gt.r.matrix(), ds.train[i].gt.r.matrix());
    EXPECT_EQ(back.train[i].gt.t, ds.train[i].gt.t);
    EXPECT_EQ(back.train[i].gt.s, ds.train[i].gt.s);
    EXPECT_EQ(back.train[i].instance, ds.train[i].instance);
    EXPECT_EQ(back.train[i].seed, ds.train[i].seed);
  }
  EXPECT_EQ(dataset_jsonl(back), text);
}

TEST(DatasetJsonl, MalformedRecordsAreDataErrors) {
  const Dataset ds = generate_dataset(SmallConfig(), 17);
  nlohmann::json good = record_json(ds.train[0], "train");
  EXPECT_THROW(parse_dataset_jsonl("{not json\n"), DataError);
  nlohmann::json bad = good;
  bad["split"] = "val";
  EXPECT_THROW(parse_dataset_jsonl(bad.dump() + "\n"), DataError);
  bad = good;
  bad["category"] = "can";
  EXPECT_THROW(parse_dataset_jsonl(bad.dump() + "\n"), DataError);
  bad = good;
  bad["points"] = std::vector<double>{1.0, 2.0};
  EXPECT_THROW(parse_dataset_jsonl(bad.dump() + "\n"), DataError);
  bad = good;
  bad["s"] = std::vector<double>{0.1, 0.0, 0.1};
  EXPECT_THROW(parse_dataset_jsonl(bad.dump() + "\n"), DataError);
  bad = good;
  bad["R"] = std::vector<double>{2, 0, 0, 0, 1, 0, 0, 0, 1};
  EXPECT_THROW(parse_dataset_jsonl(bad.dump() + "\n"), DataError);
  bad = good;
  bad.erase("t");
  try {
    parse_dataset_jsonl(good.dump() + "\n" + bad.dump() + "\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Manifest, CountsAndHash) {
  const Dataset ds = generate_dataset(SmallConfig(), 18);
  const std::string text = dataset_jsonl(ds);
  const Manifest m = make_manifest(ds, text);
  EXPECT_EQ(m.records, 15);
  EXPECT_EQ(m.train, 9);
  EXPECT_EQ(m.test, 6);
  EXPECT_EQ(m.per_category.at("mug"), 5);
  EXPECT_EQ(m.hash, hex64(fnv1a64(text)));
  const nlohmann::json j = manifest_json(m, "abc", 18);
  EXPECT_EQ(j.at("schema_version").get<int>(), kDatasetSchemaVersion);
  EXPECT_EQ(j.at("hash").get<std::string>(), m.hash);
}

TEST(ParallelFor, VisitsEveryIndexAndRethrowsTheFirstError) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  try {
    parallel_for(50, 3, [](std::size_t i) {
      if (i == 7 || i == 30) throw std::runtime_error("bad " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "bad 7");
  }
}

}  // namespace
}  // namespace sphcorr
