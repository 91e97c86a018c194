#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "dbd/losses.hpp"
#include "dbd/nn/checkpoint.hpp"
#include "dbd/nn/gradcheck.hpp"
#include "dbd/nn/model.hpp"
#include "dbd/nn/optim.hpp"

using namespace dbd;
namespace fs = std::filesystem;

namespace {

nn::ModelSpec tiny_spec(int num_classes = 3) {
  nn::ModelSpec spec;
  spec.in_channels = 3;
  spec.channels = {4, 8};
  spec.projection_dim = 4;
  spec.num_classes = num_classes;
  return spec;
}

template <typename T>
nn::Batch<T> random_batch(int n, int c, int h, int w, Rng& rng) {
  nn::Batch<T> batch(n, c, h, w);
  for (T& v : batch.data) v = static_cast<T>(rng.uniform());
  return batch;
}

}  // namespace

TEST_CASE("logits head returns K columns; features return F") {
  nn::Model<float> model(tiny_spec(5));
  model.init(Rng(0));
  Rng rng(1);
  const auto batch = random_batch<float>(2, 3, 8, 8, rng);
  nn::Model<float>::ForwardCache cache;
  CHECK(model.forward(batch, nn::Head::logits, nn::Mode::eval, cache).size() == 2 * 5);
  CHECK(model.forward(batch, nn::Head::features, nn::Mode::eval, cache).size() == 2 * 8);
  CHECK(model.forward(batch, nn::Head::projection, nn::Mode::eval, cache).size() == 2 * 4);
}

TEST_CASE("a duplicated sample gives identical rows in eval mode") {
  nn::Model<float> model(tiny_spec());
  model.init(Rng(3));
  Rng rng(4);
  const auto single = random_batch<float>(1, 3, 8, 8, rng);
  nn::Batch<float> doubled(2, 3, 8, 8);
  std::copy(single.data.begin(), single.data.end(), doubled.data.begin());
  std::copy(single.data.begin(), single.data.end(),
            doubled.data.begin() + static_cast<std::ptrdiff_t>(single.size()));
  nn::Model<float>::ForwardCache cache;
  const auto out = model.forward(doubled, nn::Head::logits, nn::Mode::eval, cache);
  const int k = model.spec().num_classes;
  for (int j = 0; j < k; ++j) REQUIRE(out[j] == out[k + j]);
}

TEST_CASE("eval-mode forward is bitwise repeatable") {
  nn::Model<float> model(tiny_spec());
  model.init(Rng(5));
  Rng rng(6);
  const auto batch = random_batch<float>(3, 3, 8, 8, rng);
  nn::Model<float>::ForwardCache cache;
  const auto a = model.forward(batch, nn::Head::logits, nn::Mode::eval, cache);
  const auto b = model.forward(batch, nn::Head::logits, nn::Mode::eval, cache);
  CHECK(a == b);
}

TEST_CASE("optimizer no-ops on zero gradients without weight decay") {
  for (const auto algo :
       {nn::OptimConfig::Algo::sgd_momentum, nn::OptimConfig::Algo::adam}) {
    nn::Param<float> p;
    p.name = "w";
    p.init_shape({4});
    p.value = {1.0f, -2.0f, 0.5f, 3.0f};
    p.grad.assign(4, 0.0f);
    nn::OptimConfig cfg;
    cfg.algo = algo;
    cfg.learning_rate = 0.1;
    nn::Optimizer<float> opt({&p}, cfg);
    const auto before = p.value;
    for (int s = 0; s < 5; ++s) opt.step(s);
    CHECK(p.value == before);
  }
}

TEST_CASE("sgd momentum matches the hand-evaluated update rule") {
  nn::Param<float> p;
  p.name = "w";
  p.init_shape({1});
  p.value = {0.0f};
  nn::OptimConfig cfg;
  cfg.algo = nn::OptimConfig::Algo::sgd_momentum;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;
  nn::Optimizer<float> opt({&p}, cfg);

  p.grad = {1.0f};
  opt.step(0);
  CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-6));  // v=1, w=-lr*v

  p.grad = {1.0f};
  opt.step(1);
  CHECK(p.value[0] == doctest::Approx(-0.1 - 0.1 * 1.9).epsilon(1e-6));  // v=1.9
}

TEST_CASE("adam first step matches the closed form") {
  nn::Param<float> p;
  p.name = "w";
  p.init_shape({1});
  p.value = {0.5f};
  nn::OptimConfig cfg;
  cfg.algo = nn::OptimConfig::Algo::adam;
  cfg.learning_rate = 0.002;
  nn::Optimizer<float> opt({&p}, cfg);
  p.grad = {3.0f};
  opt.step(0);
  const double expected = 0.5 - 0.002 * (3.0 / (std::sqrt(9.0) + 1e-8));
  CHECK(p.value[0] == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("frozen backbone stays bit-identical while the head moves") {
  nn::Model<float> model(tiny_spec());
  model.init(Rng(7));
  std::vector<float> backbone_before;
  for (nn::Param<float>* p : model.params())
    if (p->group == nn::ParamGroup::backbone)
      backbone_before.insert(backbone_before.end(), p->value.begin(), p->value.end());

  nn::OptimConfig cfg;
  cfg.algo = nn::OptimConfig::Algo::sgd_momentum;
  cfg.learning_rate = 0.1;
  nn::Optimizer<float> opt(model.params(), cfg);
  opt.set_frozen(nn::ParamGroup::backbone, true);
  for (int s = 0; s < 3; ++s) {
    for (nn::Param<float>* p : model.params()) std::fill(p->grad.begin(), p->grad.end(), 1.0f);
    opt.step(s);
  }

  std::vector<float> backbone_after;
  bool head_moved = false;
  for (nn::Param<float>* p : model.params()) {
    if (p->group == nn::ParamGroup::backbone)
      backbone_after.insert(backbone_after.end(), p->value.begin(), p->value.end());
    else
      for (float v : p->value) head_moved |= v != 0.0f;
  }
  CHECK(backbone_before == backbone_after);
  CHECK(head_moved);
}

TEST_CASE("learning-rate schedules") {
  nn::OptimConfig cfg;
  cfg.learning_rate = 0.4;
  cfg.schedule = nn::OptimConfig::Schedule::cosine;
  cfg.total_steps = 100;
  CHECK(cfg.lr_at(0) == doctest::Approx(0.4));
  CHECK(cfg.lr_at(50) == doctest::Approx(0.2));
  CHECK(cfg.lr_at(100) == doctest::Approx(0.0).epsilon(1e-12));

  cfg.schedule = nn::OptimConfig::Schedule::step;
  cfg.milestones = {10, 20};
  cfg.step_gamma = 0.1;
  CHECK(cfg.lr_at(5) == doctest::Approx(0.4));
  CHECK(cfg.lr_at(15) == doctest::Approx(0.04));
  CHECK(cfg.lr_at(25) == doctest::Approx(0.004));
}

TEST_CASE("gradcheck: quadratic loss is exact") {
  nn::Param<double> w;
  w.name = "w";
  w.init_shape({16});
  Rng rng(8);
  for (double& v : w.value) v = rng.uniform(-1.0, 1.0);

  auto loss = [&]() {
    double acc = 0.0;
    for (double v : w.value) acc += 0.5 * v * v;
    return acc;
  };
  auto grads = [&]() {
    for (size_t i = 0; i < w.value.size(); ++i) w.grad[i] = w.value[i];
  };
  const auto report = nn::finite_diff_gradcheck(loss, grads, {&w}, 32, 1e-3, 1e-8, Rng(9));
  CHECK(report.max_rel_error <= 1e-8);
}

TEST_CASE("gradcheck: contrastive loss through the full model") {
  nn::Model<double> model(tiny_spec());
  {
    nn::Model<float> seed_model(tiny_spec());
    seed_model.init(Rng(10));
    model = seed_model.cast<double>();
  }
  Rng rng(11);
  const auto batch = random_batch<double>(4, 3, 8, 8, rng);

  nn::Model<double>::ForwardCache cache;
  auto loss = [&]() {
    const auto z =
        model.forward(batch, nn::Head::projection, nn::Mode::train, cache);
    return losses::nt_xent(z, 4, model.spec().projection_dim, 0.5);
  };
  auto grads = [&]() {
    const auto z = model.forward(batch, nn::Head::projection, nn::Mode::train, cache);
    std::vector<double> dz;
    losses::nt_xent(z, 4, model.spec().projection_dim, 0.5, &dz);
    model.backward(dz, cache);
  };
  const auto report =
      nn::finite_diff_gradcheck(loss, grads, model.params(), 40, 1e-3, 1e-4, Rng(12));
  INFO("max rel error ", report.max_rel_error);
  CHECK(report.passed(1e-4));
}

TEST_CASE("gradcheck: symmetric cross-entropy through the full model") {
  nn::Model<double> model(tiny_spec());
  {
    nn::Model<float> seed_model(tiny_spec());
    seed_model.init(Rng(13));
    model = seed_model.cast<double>();
  }
  Rng rng(14);
  const auto batch = random_batch<double>(5, 3, 8, 8, rng);
  const std::vector<int> labels = {0, 2, 1, 1, 0};

  nn::Model<double>::ForwardCache cache;
  auto loss = [&]() {
    const auto logits = model.forward(batch, nn::Head::logits, nn::Mode::train, cache);
    return losses::sce_on_logits(logits, labels, 3, 0.1, 1.0, -4.0);
  };
  auto grads = [&]() {
    const auto logits = model.forward(batch, nn::Head::logits, nn::Mode::train, cache);
    std::vector<double> d_logits;
    losses::sce_on_logits(logits, labels, 3, 0.1, 1.0, -4.0, &d_logits);
    model.backward(d_logits, cache);
  };
  const auto report =
      nn::finite_diff_gradcheck(loss, grads, model.params(), 40, 1e-3, 1e-4, Rng(15));
  INFO("max rel error ", report.max_rel_error);
  CHECK(report.passed(1e-4));
}

TEST_CASE("input gradients flow through the encoder") {
  nn::Model<double> model(tiny_spec());
  {
    nn::Model<float> seed_model(tiny_spec());
    seed_model.init(Rng(16));
    model = seed_model.cast<double>();
  }
  Rng rng(17);
  auto batch = random_batch<double>(1, 3, 8, 8, rng);
  const std::vector<int> labels = {1};

  nn::Model<double>::ForwardCache cache;
  auto loss_at = [&](double* coord) {
    (void)coord;
    const auto logits = model.forward(batch, nn::Head::logits, nn::Mode::eval, cache);
    return losses::ce_on_logits(logits, labels, 3, -30.0);
  };
  const auto logits = model.forward(batch, nn::Head::logits, nn::Mode::eval, cache);
  std::vector<double> d_logits;
  losses::ce_on_logits(logits, labels, 3, -30.0, &d_logits);
  model.zero_grad();
  nn::Batch<double> d_input;
  model.backward(d_logits, cache, &d_input);

  Rng probe_rng(18);
  double max_rel = 0.0;
  for (int probe = 0; probe < 20; ++probe) {
    const size_t j = probe_rng.uniform_index(batch.size());
    const double saved = batch.data[j];
    const double h = 1e-4;
    batch.data[j] = saved + h;
    const double up = loss_at(nullptr);
    batch.data[j] = saved - h;
    const double down = loss_at(nullptr);
    batch.data[j] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(d_input.data[j]), 1e-5});
    max_rel = std::max(max_rel, std::abs(numeric - d_input.data[j]) / denom);
  }
  INFO("max rel error ", max_rel);
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("checkpoints reload bit-exactly and reject wrong architectures") {
  const fs::path dir = fs::temp_directory_path() / "dbd_test_ckpt";
  fs::remove_all(dir);

  nn::Model<float> model(tiny_spec());
  model.init(Rng(19));
  // make buffers non-trivial
  Rng rng(20);
  const auto batch = random_batch<float>(4, 3, 8, 8, rng);
  nn::Model<float>::ForwardCache cache;
  (void)model.forward(batch, nn::Head::logits, nn::Mode::train, cache);
  nn::save_checkpoint(model, dir, 17);

  nn::Model<float> reloaded(tiny_spec());
  CHECK(nn::load_checkpoint(reloaded, dir) == 17);
  auto a = model.params();
  auto b = reloaded.params();
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i]->value == b[i]->value);
  auto ab = model.buffers();
  auto bb = reloaded.buffers();
  for (size_t i = 0; i < ab.size(); ++i) REQUIRE(ab[i]->value == bb[i]->value);

  nn::Model<float> wrong(tiny_spec(7));
  CHECK_THROWS_AS(nn::load_checkpoint(wrong, dir), FormatError);
  CHECK(nn::peek_checkpoint_spec(dir).num_classes == 3);
}
