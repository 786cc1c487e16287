#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "simpleir/curriculum/plan.hpp"

namespace simpleir {
namespace {

ImageBuffer gray_levels(const std::vector<int>& levels, std::size_t w) {
  ImageBuffer img(levels.size() / w, w, 1);
  for (std::size_t i = 0; i < levels.size(); ++i) img.values[i] = levels[i] / 255.0;
  return img;
}

DatasetDescriptor descriptor(const std::string& name, std::vector<double> values) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < values.size(); ++i) ids.push_back(name + "-" + std::to_string(i));
  DatasetDescriptor d{name, "custom", ids, ids.size(), 0, std::nullopt};
  d.stats = make_entropy_stats(ids, std::move(values));
  return d;
}

ChallengeArchive archive_of(std::size_t n, std::size_t stage, const std::string& dataset) {
  ChallengeArchive a{stage, dataset, {}};
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04zu", dataset.c_str(), i);
    a.entries.push_back({id, double(n - i), HarvestRule::loss});
  }
  return a;
}

SampleIndex index_for(const std::vector<ChallengeArchive>& archives) {
  SampleIndex idx;
  for (const auto& a : archives)
    for (const auto& e : a.entries) idx[a.dataset].insert(e.id);
  return idx;
}

std::size_t reviewed_count(const std::vector<RosterEntry>& roster, const std::string& dataset) {
  return static_cast<std::size_t>(std::count_if(roster.begin(), roster.end(), [&](const RosterEntry& e) {
    return e.reviewed && e.dataset == dataset;
  }));
}

TEST(Entropy, ConstantImageHasZeroBits) {
  EXPECT_EQ(image_entropy(ImageBuffer(8, 8, 3, 0.3)), 0.0);
}

TEST(Entropy, TwoEqualLevelsGiveOneBit) {
  std::vector<int> levels(64);
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = i % 2 ? 200 : 10;
  EXPECT_DOUBLE_EQ(image_entropy(gray_levels(levels, 8)), 1.0);
}

TEST(Entropy, AllLevelsEquallyFrequentGiveEightBits) {
  std::vector<int> levels(512);
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = int(i % 256);
  EXPECT_NEAR(image_entropy(gray_levels(levels, 32)), 8.0, 1e-12);
}

TEST(Entropy, LumaUsesBt601Weights) {
  ImageBuffer red(1, 1, 3, 0.0);
  red.at(0, 0, 0) = 1.0;
  EXPECT_EQ(luma8(red, 0, 0), 76);  // round(0.299 * 255)
  ImageBuffer white(1, 1, 3, 1.0);
  EXPECT_EQ(luma8(white, 0, 0), 255);
}

TEST(Entropy, DifferenceIsAbsoluteAndSymmetric) {
  const ImageBuffer constant(8, 8, 1, 0.5);
  std::vector<int> levels(64);
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = i < 32 ? 0 : 255;
  const ImageBuffer binary = gray_levels(levels, 8);
  EXPECT_EQ(entropy_difference(binary, binary), 0.0);
  EXPECT_DOUBLE_EQ(entropy_difference(constant, binary), 1.0);
  EXPECT_EQ(entropy_difference(constant, binary), entropy_difference(binary, constant));
  EXPECT_THROW(image_entropy(ImageBuffer{}), DimensionError);
}

TEST(EntropyStats, HistogramCountsSumToSamples) {
  const EntropyStats s = make_entropy_stats({"a", "b", "c", "d"}, {0.0, 0.15, 7.99, 9.0});
  EXPECT_EQ(s.bin_edges.size(), 51u);
  EXPECT_EQ(s.bin_edges.back(), 8.0);
  EXPECT_EQ(std::accumulate(s.counts.begin(), s.counts.end(), std::size_t{0}), 4u);
  EXPECT_EQ(s.counts[0], 2u);  // bin width 0.16
  EXPECT_EQ(s.counts[49], 2u);
  EXPECT_NEAR(s.mean, (0.15 + 7.99 + 9.0) / 4.0, 1e-15);
  EXPECT_THROW(make_entropy_stats({"a"}, {-0.1}), NumericError);
}

TEST(Ranking, SingleDatasetIsOneStage) {
  const CurriculumPlan p = rank_datasets({descriptor("only", {0.4})});
  EXPECT_EQ(p.order, std::vector<std::string>{"only"});
}

TEST(Ranking, AscendingMeanIndependentOfInputOrder) {
  auto a = descriptor("a", {1.4, 1.6});  // 1.5
  auto b = descriptor("b", {0.1, 0.3});  // 0.2
  auto c = descriptor("c", {0.8, 1.0});  // 0.9
  const CurriculumPlan p1 = rank_datasets({a, b, c});
  const CurriculumPlan p2 = rank_datasets({c, a, b});
  EXPECT_EQ(p1.order, (std::vector<std::string>{"b", "c", "a"}));
  EXPECT_NEAR(p1.mean_differences[0], 0.2, 1e-15);
  EXPECT_NEAR(p1.mean_differences[1], 0.9, 1e-15);
  EXPECT_NEAR(p1.mean_differences[2], 1.5, 1e-15);
  EXPECT_EQ(p1, p2);
}

TEST(Ranking, TiesBreakByName) {
  const CurriculumPlan p = rank_datasets({descriptor("zeta", {0.5}), descriptor("alpha", {0.5})});
  EXPECT_EQ(p.order, (std::vector<std::string>{"alpha", "zeta"}));
}

TEST(Ranking, MissingStatsIsContractError) {
  DatasetDescriptor d{"x", "custom", {}, 0, 0, std::nullopt};
  EXPECT_THROW(rank_datasets({d}), ContractError);
  EXPECT_THROW(rank_datasets({}), ConfigError);
}

TEST(Ranking, ShuffledPlanIsDifferentPermutation) {
  const CurriculumPlan p = rank_datasets({descriptor("a", {0.1}), descriptor("b", {0.2}), descriptor("c", {0.3})});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CurriculumPlan s = shuffled_plan(p, seed);
    EXPECT_NE(s.order, p.order);
    auto sorted = s.order;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, p.order);
    EXPECT_EQ(s, shuffled_plan(p, seed));
  }
  const CurriculumPlan two = rank_datasets({descriptor("a", {0.1}), descriptor("b", {0.2})});
  EXPECT_EQ(shuffled_plan(two, 3).order, (std::vector<std::string>{"b", "a"}));
}

TEST(LossHarvest, OutlierExample) {
  const std::map<std::string, double> losses{{"s0", 1}, {"s1", 1}, {"s2", 1}, {"s3", 1}, {"s4", 10}};
  const LossSummary s = summarize(losses);
  EXPECT_NEAR(s.mu, 2.8, 1e-15);
  EXPECT_NEAR(s.sigma, 3.6, 1e-12);
  const ChallengeArchive a = harvest_by_loss(losses, 1.0, 1, "d");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.entries[0].id, "s4");
  EXPECT_EQ(a.entries[0].score, 10.0);
  EXPECT_EQ(a.entries[0].rule, HarvestRule::loss);
}

TEST(LossHarvest, EqualLossesSelectNothing) {
  const std::map<std::string, double> losses{{"a", 0.3}, {"b", 0.3}, {"c", 0.3}};
  EXPECT_EQ(harvest_by_loss(losses, 1.0, 1, "d").size(), 0u);
  EXPECT_EQ(harvest_by_loss(losses, 0.0, 1, "d").size(), 0u);
}

TEST(LossHarvest, ZeroKappaSelectsAboveMean) {
  const std::map<std::string, double> losses{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}};
  const ChallengeArchive a = harvest_by_loss(losses, 0.0, 1, "d");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.entries[0].id, "d");
  EXPECT_EQ(a.entries[1].id, "c");
}

TEST(LossHarvest, MonotoneInKappa) {
  std::mt19937_64 gen(5);
  std::lognormal_distribution<double> dist(0.0, 0.7);
  std::map<std::string, double> losses;
  for (int i = 0; i < 100; ++i) losses["s" + std::to_string(i)] = dist(gen);
  std::size_t previous = losses.size() + 1;
  for (double kappa = -1.0; kappa <= 3.0; kappa += 0.25) {
    const std::size_t n = harvest_by_loss(losses, kappa, 1, "d").size();
    EXPECT_LE(n, previous);
    previous = n;
  }
  EXPECT_THROW(harvest_by_loss(std::map<std::string, double>{}, 1.0, 1, "d"), ContractError);
}

TEST(LossStatsWindow, TrailingWindowAndPerSampleMeans) {
  LossStats s(3);
  s.record(1, "a", 1.0);
  s.record(2, "b", 2.0);
  s.record(3, "a", 3.0);
  EXPECT_EQ(s.per_sample().at("a"), 2.0);
  s.record(4, "b", 4.0);  // iteration 1 leaves the window
  EXPECT_EQ(s.history().size(), 3u);
  EXPECT_EQ(s.per_sample().at("a"), 3.0);
  EXPECT_EQ(s.per_sample().at("b"), 3.0);
  EXPECT_THROW(s.record(4, "a", 1.0), ContractError);
  EXPECT_THROW(s.record(5, "a", std::nan("")), NumericError);
  const LossStats back = LossStats::deserialize(s.serialize());
  EXPECT_EQ(back, s);
  EXPECT_THROW(LossStats::deserialize("window 3\n1 a zz\n"), FormatError);
}

TEST(EntropyHarvest, TopFractionAndTies) {
  const EntropyStats stats =
      make_entropy_stats({"s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9"},
                         {0.1, 0.9, 0.3, 0.8, 0.2, 0.4, 0.5, 0.6, 0.7, 0.05});
  const ChallengeArchive a = harvest_by_entropy(stats, 0.2, 2, "d");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.entries[0].id, "s1");
  EXPECT_EQ(a.entries[1].id, "s3");
  EXPECT_EQ(a.stage, 2u);
  EXPECT_EQ(harvest_by_entropy(stats, 0.0, 2, "d").size(), 0u);
  const ChallengeArchive all = harvest_by_entropy(stats, 1.0, 2, "d");
  ASSERT_EQ(all.size(), 10u);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(all.entries[i - 1].score, all.entries[i].score);
  EXPECT_THROW(harvest_by_entropy(stats, 1.5, 2, "d"), ConfigError);

  const EntropyStats tied = make_entropy_stats({"c", "a", "b", "d"}, {0.5, 0.5, 0.5, 0.1});
  const ChallengeArchive t = harvest_by_entropy(tied, 0.5, 2, "d");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.entries[0].id, "a");
  EXPECT_EQ(t.entries[1].id, "b");
}

TEST(ReviewMix, QuotasHalveWithFloor) {
  const ChallengeArchive snow = archive_of(300, 1, "snow");
  const SampleIndex idx = index_for({snow});
  const std::vector<std::string> current{"x0", "x1"};
  const std::size_t expected[] = {150, 75, 37};
  for (std::size_t stage = 2; stage <= 4; ++stage) {
    EXPECT_EQ(review_quota(300, 1, stage, 0.5), expected[stage - 2]);
    const auto roster = review_mix("cur", current, {snow}, stage, 0.5, 7, idx);
    EXPECT_EQ(reviewed_count(roster, "snow"), expected[stage - 2]);
    EXPECT_EQ(roster.size(), current.size() + expected[stage - 2]);
  }
}

TEST(ReviewMix, TakesTopEntriesOfEachArchive) {
  const ChallengeArchive a = archive_of(10, 1, "a");
  const ChallengeArchive b = archive_of(4, 2, "b");
  const auto roster = review_mix("cur", {"x"}, {a, b}, 3, 0.5, 1, index_for({a, b}));
  EXPECT_EQ(reviewed_count(roster, "a"), 2u);  // floor(10 * 0.25)
  EXPECT_EQ(reviewed_count(roster, "b"), 2u);  // floor(4 * 0.5)
  for (const RosterEntry& e : roster)
    if (e.reviewed && e.dataset == "a") {
      EXPECT_TRUE(e.id == "a-0000" || e.id == "a-0001");
    }
  EXPECT_LE(roster.size() - 1, a.size() + b.size());
}

TEST(ReviewMix, NoArchivesLeavesDatasetUnchanged) {
  const std::vector<std::string> ids{"c", "a", "b"};
  const auto roster = review_mix("cur", ids, {}, 1, 0.5, 3, {});
  ASSERT_EQ(roster.size(), 3u);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(roster[i].id, ids[i]);
}

TEST(ReviewMix, NoDecayReinjectsEverything) {
  const ChallengeArchive a = archive_of(7, 1, "a");
  for (std::size_t stage = 2; stage <= 5; ++stage) {
    EXPECT_EQ(reviewed_count(review_mix("cur", {"x"}, {a}, stage, 1.0, 0, index_for({a})), "a"), 7u);
  }
}

TEST(ReviewMix, DeterministicShuffleAndValidation) {
  const ChallengeArchive a = archive_of(20, 1, "a");
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("x" + std::to_string(i));
  const auto r1 = review_mix("cur", ids, {a}, 2, 0.5, 9, index_for({a}));
  EXPECT_EQ(r1, review_mix("cur", ids, {a}, 2, 0.5, 9, index_for({a})));
  EXPECT_NE(r1, review_mix("cur", ids, {a}, 2, 0.5, 10, index_for({a})));
  SampleIndex partial{{"a", {"a-0000"}}};
  EXPECT_THROW(review_mix("cur", ids, {a}, 2, 0.5, 9, partial), DataError);
  EXPECT_THROW(review_mix("cur", ids, {a}, 2, 0.5, 9, {}), DataError);
  EXPECT_THROW(review_mix("cur", ids, {a}, 1, 0.5, 9, index_for({a})), ContractError);
}

TEST(StagePlanning, PaperScheduleAndScaling) {
  const CurriculumPlan p = rank_datasets(
      {descriptor("a", {0.1}), descriptor("b", {0.2}), descriptor("c", {0.3}), descriptor("d", {0.4})});
  const auto full = plan_stages(p, HarvestConfig{}, ScheduleConfig{});
  ASSERT_EQ(full.size(), 4u);
  const std::uint64_t iters[] = {200000, 10000, 10000, 10000};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(full[i].iterations, iters[i]);
  EXPECT_EQ(full[0].lr, 2e-4);
  EXPECT_EQ(full[1].lr, 1e-4);
  EXPECT_EQ(full[0].rule, HarvestRule::loss);
  EXPECT_EQ(full[0].harvest_start, 100000u);
  EXPECT_EQ(full[0].loss_window, 1000u);
  EXPECT_EQ(full[2].rule, HarvestRule::entropy);
  EXPECT_FALSE(full[0].review);
  EXPECT_TRUE(full[3].review);

  ScheduleConfig small;
  small.scale = 0.001;
  const auto desk = plan_stages(p, HarvestConfig{}, small);
  const std::uint64_t scaled_iters[] = {200, 10, 10, 10};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(desk[i].iterations, scaled_iters[i]);
  EXPECT_EQ(desk[0].harvest_start, 100u);
  EXPECT_EQ(desk, plan_stages(p, HarvestConfig{}, small));
}

TEST(StagePlanning, SingleDatasetAndNoReview) {
  const auto one = plan_stages(rank_datasets({descriptor("a", {0.1})}), HarvestConfig{}, ScheduleConfig{});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_FALSE(one[0].review);
  HarvestConfig off;
  off.top_fraction = 0.0;
  const auto none = plan_stages(rank_datasets({descriptor("a", {0.1}), descriptor("b", {0.2})}), off, ScheduleConfig{});
  EXPECT_FALSE(none[1].review);
  EXPECT_EQ(none[1].rule, HarvestRule::none);
  EXPECT_THROW(plan_stages(CurriculumPlan{}, HarvestConfig{}, ScheduleConfig{}), ConfigError);
}

TEST(PlanFile, RoundTrip) {
  const CurriculumPlan p = rank_datasets({descriptor("blur", {0.1, 0.2}), descriptor("snow", {0.31})});
  ScheduleConfig sc;
  sc.scale = 0.01;
  sc.crop_size = 32;
  const auto stages = plan_stages(p, HarvestConfig{}, sc);
  const std::string text = plan_to_text(p, HarvestConfig{}, stages);
  const PlanDocument doc = plan_from_text(text);
  EXPECT_EQ(doc.plan, p);
  EXPECT_EQ(doc.stages, stages);
  EXPECT_EQ(plan_to_text(doc.plan, doc.harvest, doc.stages), text);
  std::string v2 = text;
  v2.replace(v2.find("version = 1"), 11, "version = 2");
  EXPECT_THROW(plan_from_text(v2), VersionError);
}

TEST(ArchiveFile, RoundTripAndErrors) {
  ChallengeArchive a = archive_of(5, 1, "blur");
  a.entries[2].score = 0.1 + 0.2;
  const ChallengeArchive back = archive_from_text(archive_to_text(a));
  EXPECT_EQ(back, a);
  EXPECT_EQ(archive_digest(back), archive_digest(a));
  EXPECT_THROW(archive_from_text("garbage\n"), FormatError);
  std::string text = archive_to_text(a);
  text.replace(text.find("entries=5"), 9, "entries=6");
  EXPECT_THROW(archive_from_text(text), FormatError);
}

}  // namespace
}  // namespace simpleir
