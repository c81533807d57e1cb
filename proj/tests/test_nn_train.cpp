#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "nn_support.hpp"
#include "published_results.hpp"
#include "support.hpp"
#include "tender/nn/metrics.hpp"
#include "tender/nn/train.hpp"
#include "tender/pipeline/synthetic.hpp"

using namespace tender;
using namespace tender::nn;
using namespace tender::testing;

namespace {

Dataset small_set(int n, std::uint64_t seed, std::size_t size = 64) {
  auto s = pipeline::generate_classifier_samples(n, size, seed);
  return make_dataset(s.images, s.labels, size);
}

}  // namespace

TEST_CASE("metrics_from_confusion definitions") {
  auto m = metrics_from_confusion(6, 2, 1, 11);
  CHECK(m.accuracy == doctest::Approx(17.0 / 20.0));
  CHECK(m.precision == doctest::Approx(6.0 / 8.0));
  CHECK(m.recall == doctest::Approx(6.0 / 7.0));
  CHECK(m.f1 == doctest::Approx(2 * 0.75 * (6.0 / 7.0) / (0.75 + 6.0 / 7.0)));

  auto perfect = metrics_from_confusion(5, 0, 0, 5);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  auto degenerate = metrics_from_confusion(0, 0, 0, 10);
  CHECK(degenerate.accuracy == 1.0);
  CHECK(degenerate.precision == 0.0);
  CHECK(degenerate.recall == 0.0);
  CHECK(degenerate.f1 == 0.0);

  auto none_predicted = metrics_from_confusion(0, 0, 4, 6);
  CHECK(none_predicted.recall == 0.0);

  try {
    metrics_from_confusion(0, 0, 0, 0);
    FAIL("expected EmptyTotal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTotal);
  }
}

TEST_CASE("F1 reproduces the published precision/recall pairs") {
  for (const auto& row : kPublished) {
    INFO(to_string(row.arch) << " @" << row.epochs);
    CHECK(std::abs(f1_score(row.precision, row.recall) - row.f1) <= 5e-4);
  }
}

TEST_CASE("f1 is the harmonic mean whenever defined") {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> d(0, 30);
  for (int i = 0; i < 200; ++i) {
    std::uint64_t tp = d(gen), fp = d(gen), fn = d(gen), tn = d(gen);
    if (tp + fp + fn + tn == 0) continue;
    auto m = metrics_from_confusion(tp, fp, fn, tn);
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
    if (m.precision + m.recall > 0)
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)).epsilon(1e-14));
  }
}

TEST_CASE("count_confusion equals a brute-force recount") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> pred(37), lab(37);
    for (auto& v : pred) v = static_cast<int>(gen() % 2);
    for (auto& v : lab) v = static_cast<int>(gen() % 2);
    auto c = count_confusion(pred, lab);
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] && lab[i]) ++tp;
      if (pred[i] && !lab[i]) ++fp;
      if (!pred[i] && lab[i]) ++fn;
      if (!pred[i] && !lab[i]) ++tn;
    }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.fn == fn);
    CHECK(c.tn == tn);
  }
}

TEST_CASE("images_to_tensor scales pixels and checks sizes") {
  std::vector<image::GrayImage> imgs{image::GrayImage(2, 2, {0, 255, 51, 102})};
  auto t = images_to_tensor(imgs, 2);
  CHECK(t.shape() == Shape{1, 1, 2, 2});
  CHECK(t[1] == 1.0);
  CHECK(t[2] == doctest::Approx(0.2));
  CHECK_THROWS_AS(images_to_tensor(imgs, 3), Error);
}

TEST_CASE("prepare_input pads then resizes") {
  image::GrayImage wide(40, 20, 200);
  auto p = prepare_input(wide, 64);
  CHECK(p.width() == 64);
  CHECK(p.height() == 64);
  CHECK(p.at(5, 5) == 200);
  CHECK(p.at(5, 60) == 0);
}

TEST_CASE("stratified split keeps class ratios and covers every sample once") {
  auto all = small_set(50, 3, 64);
  auto split = stratified_split(all, 0.2, 7);
  CHECK(split.train.size() + split.test.size() == 50);
  int pos_test = 0;
  for (int l : split.test.labels) pos_test += l;
  CHECK(split.test.size() == 10);
  CHECK(pos_test == 5);
  auto again = stratified_split(all, 0.2, 7);
  CHECK(again.test.images == split.test.images);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.epochs = 1;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.batch_size = 4;
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  auto all = small_set(48, 5);
  auto split = stratified_split(all, 0.25, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 99;
  Model a(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  Model b(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  auto ra = train_model(a, split.train, split.test, cfg);
  auto rb = train_model(b, split.train, split.test, cfg);
  REQUIRE(ra.history.size() == 3);
  CHECK(ra.history == rb.history);
  for (int e = 0; e < 3; ++e) CHECK(ra.history[e].epoch == e + 1);

  TempDir dir("hist");
  write_history_csv(dir / "a.csv", ra.history);
  write_history_csv(dir / "b.csv", rb.history);
  std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
  std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(sa.rfind("epoch,train_loss,train_acc,test_loss,test_acc\n", 0) == 0);
  CHECK(read_history_csv(dir / "a.csv") == ra.history);

  cfg.seed = 100;
  Model c(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  auto rc = train_model(c, split.train, split.test, cfg);
  CHECK_FALSE(rc.history == ra.history);
}

TEST_CASE("learning rate zero leaves trainable weights untouched") {
  auto all = small_set(16, 6);
  auto split = stratified_split(all, 0.25, 6);
  for (auto opt : {Optimizer::Adam, Optimizer::SgdMomentum}) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 64;  // one full batch per epoch
    cfg.learning_rate = 0.0;
    cfg.optimizer = opt;
    Model m(build_model(Arch::ResNet, 64, WidthPreset::Tiny));
    m.initialize(cfg.seed);
    std::vector<Tensor> before;
    for (auto& [name, p] : std::as_const(m).parameters())
      if (p->trainable) before.push_back(p->value);
    auto r = train_model(m, split.train, split.test, cfg);
    std::size_t i = 0;
    for (auto& [name, p] : std::as_const(m).parameters())
      if (p->trainable) CHECK(p->value == before[i++]);
    // batch order differs per epoch, so the mean loss may differ in the last bits
    for (const auto& row : r.history)
      CHECK(std::abs(row.train_loss - r.history[0].train_loss) <= 1e-12 * std::abs(r.history[0].train_loss));
  }
}

TEST_CASE("training reduces the loss on separable data") {
  auto all = small_set(64, 8);
  auto split = stratified_split(all, 0.25, 8);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 16;
  Model m(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  auto r = train_model(m, split.train, split.test, cfg);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
}

TEST_CASE("training errors") {
  Model m(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  auto good = small_set(8, 9);
  Dataset empty{Tensor({0, 1, 64, 64}), {}};
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train_model(m, empty, good, cfg);
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
  CHECK_THROWS_AS(evaluate_model(m, empty), Error);

  auto bad = good;
  bad.images[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train_model(m, bad, good, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }

  auto small = small_set(8, 9, 64);
  Model wrong(build_model(Arch::Xception, 112, WidthPreset::Tiny));
  CHECK_THROWS_AS(train_model(wrong, small, small, cfg), Error);
}

TEST_CASE("checkpoints are written at the requested epochs") {
  TempDir dir("ck");
  auto all = small_set(24, 10);
  auto split = stratified_split(all, 0.25, 10);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.checkpoint_epochs = {2, 4};
  cfg.checkpoint_dir = dir.path();
  Model m(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  auto r = train_model(m, split.train, split.test, cfg);
  REQUIRE(r.checkpoints.size() == 2);
  CHECK(r.checkpoints[0].epoch == 2);
  CHECK(r.checkpoints[1].epoch == 4);
  for (const auto& c : r.checkpoints) CHECK(std::filesystem::exists(c.weights));
  // the last checkpoint is the final model
  auto final_metrics = evaluate_model(m, split.test);
  CHECK(r.checkpoints[1].test_metrics.accuracy == final_metrics.accuracy);
  CHECK(r.checkpoints[1].test_metrics.loss == doctest::Approx(r.history.back().test_loss));
}

TEST_CASE("predict_batch") {
  Model untrained(build_model(Arch::Xception, 64, WidthPreset::Tiny));
  std::vector<image::GrayImage> none;
  auto one = pipeline::generate_classifier_samples(2, 64, 11);
  try {
    predict_batch(untrained, one.images);
    FAIL("expected ModelNotTrained");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModelNotTrained);
  }

  auto all = small_set(40, 12);
  auto split = stratified_split(all, 0.25, 12);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 10;
  for (auto arch : {Arch::Xception, Arch::ResNet}) {
    Model m(build_model(arch, 64, WidthPreset::Tiny));
    train_model(m, split.train, split.test, cfg);
    CHECK(predict_batch(m, none).empty());

    auto samples = pipeline::generate_classifier_samples(12, 64, 13);
    std::vector<image::GrayImage> imgs = samples.images;
    imgs.push_back(samples.images[3]);
    auto preds = predict_batch(m, imgs);
    REQUIRE(preds.size() == imgs.size());
    CHECK(preds.back().score == preds[3].score);
    CHECK(preds.back().positive == preds[3].positive);
    for (const auto& p : preds) {
      CHECK(p.score >= 0.0);
      CHECK(p.score <= 1.0);
    }

    // predictions agree with evaluate_model's confusion counts
    auto ds = make_dataset(samples.images, samples.labels, 64);
    auto metrics = evaluate_model(m, ds);
    std::vector<int> predicted;
    for (std::size_t i = 0; i < samples.images.size(); ++i) predicted.push_back(preds[i].positive ? 1 : 0);
    auto recount = metrics_from_confusion(count_confusion(predicted, samples.labels));
    CHECK(metrics.accuracy == recount.accuracy);
    CHECK(metrics.precision == recount.precision);
    CHECK(metrics.recall == recount.recall);
    CHECK(metrics.f1 == recount.f1);
  }
}

TEST_CASE("history CSV rejects malformed input") {
  TempDir dir("csv");
  std::ofstream(dir / "bad.csv") << "epoch,train_loss\n1,2\n";
  CHECK_THROWS_AS(read_history_csv(dir / "bad.csv"), Error);
}
