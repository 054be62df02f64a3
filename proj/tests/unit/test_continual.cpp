#include <algorithm>
#include <filesystem>
#include <vector>

#include "dfd/continual.hpp"
#include "dfd/corpus.hpp"
#include "dfd/error.hpp"
#include "dfd/rng.hpp"
#include "doctest.h"

using namespace dfd;
namespace fs = std::filesystem;

namespace {

std::vector<ManifestEntry> synthetic_entries(size_t n_fake, size_t n_bona) {
  std::vector<ManifestEntry> entries;
  for (size_t i = 0; i < n_fake; ++i)
    entries.push_back({"pool/fake_" + std::to_string(i) + ".wav", 1, "X", "pool"});
  for (size_t i = 0; i < n_bona; ++i)
    entries.push_back({"pool/bona_" + std::to_string(i) + ".wav", 0, "-", "pool"});
  return entries;
}

ContinualConfig default_cfg() {
  ContinualConfig cfg;
  cfg.finetune_hyper.epochs = 1;
  cfg.finetune_hyper.batch = 8;
  cfg.finetune_hyper.eval_every = 0;
  return cfg;
}

// Plugin + features fixture with controllable embeddings; mels stay empty
// because pseudo-labeling never touches them.
struct Fixture {
  PoolFeatures features;
  TrainedGBM plugin;

  explicit Fixture(const std::vector<ManifestEntry>& entries, uint64_t seed) {
    Rng rng(seed);
    features.mels.resize(entries.size());
    features.embeddings = Mat(entries.size(), 4);
    Mat train_x(40, 4);
    std::vector<int> train_y(40);
    for (size_t i = 0; i < 40; ++i) {
      const bool fake = i % 2 == 0;
      for (size_t c = 0; c < 4; ++c)
        train_x(i, c) = rng.uniform(-0.3, 0.3) + (fake && c == 0 ? 1.5 : 0.0);
      train_y[i] = fake ? 1 : 0;
    }
    GBMConfig gcfg;
    gcfg.n_trees = 40;
    plugin = train_gbm(train_x, train_y, gcfg);

    for (size_t i = 0; i < entries.size(); ++i)
      for (size_t c = 0; c < 4; ++c)
        features.embeddings(i, c) =
            rng.uniform(-0.3, 0.3) + (entries[i].label == 1 && c == 0 ? 1.5 : 0.0);
  }
};

}  // namespace

TEST_CASE("seed selection sizes and stratification") {
  ContinualConfig cfg = default_cfg();

  {
    Pool pool(synthetic_entries(5000, 5000), ".");
    Rng rng(1);
    const auto seed = pool.select_seed(cfg, rng);
    CHECK(seed.indices.size() == 10);  // round(0.001 * 10000)
    CHECK(seed.fake_count() >= 1);
    CHECK(seed.indices.size() - seed.fake_count() >= 1);
    CHECK(pool.untaken_count() == 10000 - 10);
  }
  {
    Pool pool(synthetic_entries(50, 50), ".");
    Rng rng(1);
    const auto seed = pool.select_seed(cfg, rng);
    CHECK(seed.indices.size() == 2);  // raised to the per-class minimum
    CHECK(seed.fake_count() == 1);
  }
}

TEST_CASE("seed selection is reproducible and bounded") {
  ContinualConfig cfg = default_cfg();
  Pool p1(synthetic_entries(300, 700), ".");
  Pool p2(synthetic_entries(300, 700), ".");
  Rng r1(99), r2(99);
  const auto s1 = p1.select_seed(cfg, r1);
  const auto s2 = p2.select_seed(cfg, r2);
  CHECK(s1.indices == s2.indices);
  CHECK(s1.labels == s2.labels);

  Pool tiny(synthetic_entries(1, 1), ".");
  ContinualConfig strict = cfg;
  strict.min_seed_per_class = 2;
  Rng r3(5);
  CHECK_THROWS_AS(tiny.select_seed(strict, r3), Error);
}

TEST_CASE("pseudo-labeling respects bars, ranking, and the accumulation bound") {
  const auto entries = synthetic_entries(40, 40);
  Fixture fx(entries, 71);
  Pool pool(entries, ".");
  ContinualConfig cfg = default_cfg();
  cfg.accumulate_fraction = 0.25;

  const auto pseudo = pseudo_label(fx.plugin, fx.features, pool, cfg);
  const size_t target = 20;  // round(0.25 * 80)
  CHECK(pseudo.size() <= target);
  CHECK(!pseudo.empty());
  for (const auto& item : pseudo) {
    const bool fake_side = item.confidence >= cfg.confidence_high;
    const bool bona_side = item.confidence <= cfg.confidence_low;
    CHECK((fake_side || bona_side));
    CHECK(item.label == (fake_side ? 1 : 0));
  }
  for (size_t i = 1; i < pseudo.size(); ++i)
    CHECK(std::fabs(pseudo[i - 1].confidence - 0.5) >=
          std::fabs(pseudo[i].confidence - 0.5) - 1e-15);

  // Maximally permissive bars collect exactly the target.
  ContinualConfig wide = cfg;
  wide.confidence_low = 0.5;
  wide.confidence_high = 0.5;
  const auto all = pseudo_label(fx.plugin, fx.features, pool, wide);
  CHECK(all.size() == target);
}

TEST_CASE("pseudo-labeling never reads the hidden truth") {
  auto entries = synthetic_entries(30, 30);
  Fixture fx(entries, 72);
  ContinualConfig cfg = default_cfg();
  cfg.accumulate_fraction = 0.3;

  Pool pool(entries, ".");
  const auto base = pseudo_label(fx.plugin, fx.features, pool, cfg);

  // Same features, permuted hidden labels: selections must be identical.
  auto permuted = entries;
  for (size_t i = 0; i < permuted.size(); ++i) permuted[i].label = (i * 7 % 3 == 0) ? 1 : 0;
  permuted[0].label = 1;
  permuted[1].label = 0;
  Pool shuffled(permuted, ".");
  const auto again = pseudo_label(fx.plugin, fx.features, shuffled, cfg);

  REQUIRE(base.size() == again.size());
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(base[i].pool_index == again[i].pool_index);
    CHECK(base[i].label == again[i].label);
    CHECK(base[i].confidence == again[i].confidence);
  }
}

TEST_CASE("precision readout scores pseudo labels against the hidden truth") {
  const auto entries = synthetic_entries(10, 10);
  Pool pool(entries, ".");
  std::vector<PseudoItem> items = {{0, 1, 0.99}, {1, 0, 0.01}, {10, 0, 0.02}};
  // entry 0 is fake (hit), entry 1 is fake (miss), entry 10 is bona (hit)
  CHECK(pool.pseudo_precision(items) == doctest::Approx(2.0 / 3.0));
  CHECK(pool.pseudo_precision({}) == -1.0);
}

TEST_CASE("cycle integration on a small on-disk pool") {
  const auto root = fs::temp_directory_path() / "dfd_continual_tests";
  fs::create_directories(root);

  CorpusSpec spec;
  spec.out_dir = (root / "data").string();
  spec.seed = 31;
  spec.min_duration_s = 0.5;
  spec.max_duration_s = 0.8;
  spec.splits["pool"].bonafide = 15;
  spec.splits["pool"].fakes["C_vocoder_buzz"] = 15;
  spec.splits["eval"].bonafide = 8;
  spec.splits["eval"].fakes["C_vocoder_buzz"] = 8;
  const auto all_entries = make_dataset(spec, 2);

  ModelConfig mcfg;
  mcfg.embed_dim = 16;
  mcfg.depth = 1;
  mcfg.n_heads = 1;
  mcfg.max_tokens = 64;
  Rng init(77);
  ModelParams params = ModelParams::init(mcfg, init);
  const FrontendConfig fc;

  AugmentPolicy no_aug;
  no_aug.waveform_stage = false;
  no_aug.spectrogram_stage = false;

  const auto eval_entries = filter_split(all_entries, "eval");
  const auto eval_items =
      prepare_items(eval_entries, spec.out_dir, fc, nullptr, Rng(0), 2);

  ContinualConfig cfg = default_cfg();
  cfg.seed_fraction = 0.2;
  cfg.accumulate_fraction = 0.5;
  cfg.confidence_low = 0.4;
  cfg.confidence_high = 0.6;
  cfg.gbm.n_trees = 30;
  cfg.seed = 5;
  cfg.finetune_hyper.epochs = 1;
  cfg.finetune_hyper.lr = 1e-4;

  const auto pool_entries = filter_split(all_entries, "pool");

  SUBCASE("fair comparison: both modes consume the identical seed") {
    Pool pool_a(pool_entries, spec.out_dir);
    Pool pool_b(pool_entries, spec.out_dir);
    const auto ours = run_cycle(params, fc, pool_a, eval_items, cfg, no_aug, 2);
    const auto sup = baseline_finetune(params, fc, pool_b, eval_items, cfg, no_aug, 2);
    CHECK(ours.seed.indices == sup.seed.indices);
    CHECK(ours.seed.labels == sup.seed.labels);
    CHECK(ours.report.mode == "ours");
    CHECK(sup.report.mode == "supervised");
    CHECK(sup.report.pseudo_collected == 0);
    CHECK(sup.report.pseudo_precision == -1.0);

    const auto j = ours.report.to_json();
    CHECK(j.contains("pseudo_precision"));
    CHECK(j.at("before").contains("eer"));
    CHECK(j.at("mode") == "ours");
  }

  SUBCASE("a seed covering the whole pool degenerates to supervised fine-tuning") {
    ContinualConfig whole = cfg;
    whole.min_seed_per_class = 15;  // swallows all 30 items
    Pool pool_a(pool_entries, spec.out_dir);
    Pool pool_b(pool_entries, spec.out_dir);
    const auto ours = run_cycle(params, fc, pool_a, eval_items, whole, no_aug, 2);
    const auto sup = baseline_finetune(params, fc, pool_b, eval_items, whole, no_aug, 2);
    CHECK(ours.report.seed_size == 30);
    CHECK(ours.report.pseudo_collected == 0);
    CHECK(!ours.report.finetune_skipped);

    auto a = tensor_refs(const_cast<ModelParams&>(ours.params));
    auto b = tensor_refs(const_cast<ModelParams&>(sup.params));
    for (size_t t = 0; t < a.size(); ++t)
      for (size_t i = 0; i < a[t].size; ++i) CHECK(a[t].data[i] == b[t].data[i]);
    CHECK(ours.report.after.eer == sup.report.after.eer);
  }

  SUBCASE("impossible confidence bars skip fine-tuning and report it") {
    ContinualConfig strict = cfg;
    strict.confidence_low = 0.0;
    strict.confidence_high = 1.0;  // sigmoid never reaches the bars exactly
    Pool pool(pool_entries, spec.out_dir);
    const auto ours = run_cycle(params, fc, pool, eval_items, strict, no_aug, 2);
    CHECK(ours.report.finetune_skipped);
    CHECK(ours.report.pseudo_collected == 0);
    auto a = tensor_refs(const_cast<ModelParams&>(ours.params));
    auto b = tensor_refs(params);
    for (size_t t = 0; t < a.size(); ++t)
      for (size_t i = 0; i < a[t].size; ++i) CHECK(a[t].data[i] == b[t].data[i]);
    CHECK(ours.report.after.eer == ours.report.before.eer);
  }
}
