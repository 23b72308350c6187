#include <doctest.h>

#include <chrono>
#include <random>

#include "cyscolor/palette_gan.hpp"
#include "support/gradcheck.hpp"
#include "support/toy.hpp"

using namespace cys;

namespace {

struct Fixture {
  toy::DarkBright data = toy::dark_bright(6, 8, 3);
  std::vector<TrainingExample> examples;
  TrainingBatch batch;
  Fixture() {
    examples = expand_training_examples(data.contexts, data.palettes);
    for (std::size_t i = 0; i < examples.size(); i += 3) batch.push_back(&examples[i]);
  }
};

std::vector<Eigen::MatrixXd> grads(const std::vector<ad::NamedParameter>& ps) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& p : ps) out.push_back(p.param->grad);
  return out;
}

std::vector<Eigen::MatrixXd> values(const std::vector<ad::NamedParameter>& ps) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& p : ps) out.push_back(p.param->value);
  return out;
}

std::vector<ad::NamedParameter> select(const std::vector<ad::NamedParameter>& ps, const std::string& prefix) {
  std::vector<ad::NamedParameter> out;
  for (const auto& p : ps)
    if (p.name.rfind(prefix, 0) == 0) out.push_back(p);
  return out;
}

bool in_gamut(const Palette& p) {
  for (const Color& c : p.colors()) {
    if (c.space != ColorSpace::RGB) return false;
    for (double v : {c.c0, c.c1, c.c2})
      if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("loss closed forms, hand cases") {
  CHECK(loss_discriminator(1.0, 0.0, 0.5) == 0.0);
  CHECK(loss_discriminator(0.0, 1.0, 0.5) == 1.0);
  CHECK(loss_discriminator(0.5, 0.5, 0.5) == 0.25);
  CHECK(loss_generator(1.0, 0.5) == 0.0);
  CHECK(loss_generator(0.0, 0.5) == 0.5);
  CHECK(loss_generator(0.5, 0.5) == 0.125);
}

TEST_CASE("loss formulas on random triples, scalar and graph forms") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> score(-3.0, 3.0), alpha(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double r = score(rng), f = score(rng), a = alpha(rng);
    const double ld = a * (r - 1) * (r - 1) + (1 - a) * f * f;
    const double lg = a * (f - 1) * (f - 1);
    REQUIRE(std::abs(loss_discriminator(r, f, a) - ld) <= 1e-12);
    REQUIRE(std::abs(loss_generator(f, a) - lg) <= 1e-12);
    ad::Tape tape;
    const ad::Var vr = tape.constant(Eigen::MatrixXd::Constant(1, 1, r));
    const ad::Var vf = tape.constant(Eigen::MatrixXd::Constant(1, 1, f));
    REQUIRE(std::abs(loss_discriminator(vr, vf, a).value()(0, 0) - ld) <= 1e-12);
    REQUIRE(std::abs(loss_generator(vf, a).value()(0, 0) - lg) <= 1e-12);
  }
}

TEST_CASE("config validation") {
  GanConfig c = toy::small_gan_config(8, 4, 8);
  c.alpha = 1.0;
  CHECK_THROWS_AS(PaletteGan{c}, ValidationError);
  c.alpha = 0.5;
  c.encoder.palette_mode = PaletteInputMode::Full;
  CHECK_THROWS_AS(PaletteGan{c}, ValidationError);
  const GanConfig d = toy::small_gan_config(8, 4, 8);
  const nlohmann::json j = d;
  CHECK(nlohmann::json(j.get<GanConfig>()) == j);
}

TEST_CASE("discriminator loss gradient matches finite differences") {
  Fixture fx;
  PaletteGan gan(toy::small_gan_config(8, 4, 8));
  const auto all = gan.named_parameters();
  // The fake colors are detached from the encoders. Zeroing the generator's
  // context weights removes that path so the numeric derivative sees the same function.
  auto g1w = select(gan.generator_parameters(), "generator.fc1.weight");
  g1w[0].param->value.bottomRows(16).setZero();

  Rng rng(2);
  const Eigen::MatrixXd noise = standard_normal(static_cast<Eigen::Index>(fx.batch.size()), 4, rng);
  nn::zero_grad(all);
  gan.discriminator_loss(fx.batch, noise, true);
  const auto d_params = gan.discriminator_parameters();
  const auto rep = gradcheck::compare(nn::parameter_pointers(d_params),
                                      [&] { return gan.discriminator_loss(fx.batch, noise, false); }, grads(d_params));
  MESSAGE("L_D entries=" << rep.entries << " worst relative error=" << rep.worst_relative);
  CHECK(rep.worst_relative <= 1e-4);
  for (const auto& p : gan.generator_parameters()) CHECK(p.param->grad.isZero());
}

TEST_CASE("generator loss gradient matches finite differences") {
  Fixture fx;
  PaletteGan gan(toy::small_gan_config(8, 4, 8));
  Rng rng(3);
  const Eigen::MatrixXd noise = standard_normal(static_cast<Eigen::Index>(fx.batch.size()), 4, rng);
  nn::zero_grad(gan.named_parameters());
  gan.generator_loss(fx.batch, noise, true);
  const auto g_params = gan.generator_parameters();
  const auto rep = gradcheck::compare(nn::parameter_pointers(g_params),
                                      [&] { return gan.generator_loss(fx.batch, noise, false); }, grads(g_params));
  MESSAGE("L_G entries=" << rep.entries << " worst relative error=" << rep.worst_relative);
  CHECK(rep.worst_relative <= 1e-4);
  for (const auto& p : select(gan.discriminator_parameters(), "encoders")) CHECK(p.param->grad.isZero());
}

TEST_CASE("zero learning rates leave parameters unchanged") {
  Fixture fx;
  GanConfig c = toy::small_gan_config(8, 4, 8);
  c.generator_optimizer.learning_rate = 0.0;
  c.discriminator_optimizer.learning_rate = 0.0;
  PaletteGan gan(c);
  const auto before = values(gan.named_parameters());
  Rng rng(4);
  for (int i = 0; i < 3; ++i) gan.train_step(fx.batch, rng);
  const auto after = values(gan.named_parameters());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("one training step moves every parameter") {
  Fixture fx;
  PaletteGan gan(toy::small_gan_config(8, 4, 8));
  const auto before = values(gan.named_parameters());
  Rng rng(5);
  gan.train_step(fx.batch, rng);
  const auto after = values(gan.named_parameters());
  int changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i];
  CHECK(changed == static_cast<int>(before.size()));
}

TEST_CASE("identical seeds give identical loss trajectories") {
  Fixture fx;
  auto run = [&] {
    PaletteGan gan(toy::small_gan_config(8, 4, 8));
    TrainOptions o;
    o.steps = 20;
    o.batch_size = 8;
    o.seed = 9;
    return train_palette_gan(gan, fx.examples, o);
  };
  const auto a = run(), b = run();
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].discriminator_loss == b[i].discriminator_loss);
    CHECK(a[i].generator_loss == b[i].generator_loss);
  }
}

TEST_CASE("non-finite parameters abort with a divergence error") {
  Fixture fx;
  PaletteGan gan(toy::small_gan_config(8, 4, 8));
  select(gan.discriminator_parameters(), "discriminator.fc3.bias")[0].param->value(0, 0) =
      std::numeric_limits<double>::quiet_NaN();
  Rng rng(6);
  CHECK_THROWS_AS(gan.train_step(fx.batch, rng), DivergenceError);
}

TEST_CASE("generator and discriminator forward contracts") {
  PaletteGan gan(toy::small_gan_config(8, 4, 8));
  const ContextInput in = toy::dark_bright_context(true, 8);
  const FusedContext y = gan.context(in, {});
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd z = standard_normal(4, 1, rng);
    const Color c = gan.generator_forward(z, y);
    REQUIRE((c.c0 >= 0 && c.c0 <= 1 && c.c1 >= 0 && c.c1 <= 1 && c.c2 >= 0 && c.c2 <= 1));
    REQUIRE(std::isfinite(gan.discriminator_forward(c, y)));
  }
  const Eigen::VectorXd z = standard_normal(4, 1, rng);
  CHECK(gan.generator_forward(z, y) == gan.generator_forward(z, y));
  CHECK_THROWS_AS(gan.generator_forward(Eigen::VectorXd::Zero(3), y), ValidationError);

  int distinct_colors = 0, distinct_scores = 0;
  std::mt19937_64 g(8);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 100; ++t) {
    FusedContext y2 = y;
    for (Eigen::Index k = 0; k < y2.y.size(); ++k) y2.y[k] += 0.1 * n(g);
    distinct_colors += !(gan.generator_forward(z, y2) == gan.generator_forward(z, y));
    const Color x = Color::rgb(0.3, 0.6, 0.2);
    distinct_scores += gan.discriminator_forward(x, y2) != gan.discriminator_forward(x, y);
  }
  CHECK(distinct_colors >= 99);
  CHECK(distinct_scores >= 99);
}

TEST_CASE("sample_palette: five in-gamut colors, deterministic per seed") {
  PaletteGan gan(toy::small_gan_config(8, 4, 8));
  const ContextInput in = toy::dark_bright_context(false, 8);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Palette p = gan.sample_palette(in, s);
    REQUIRE(p.colors().size() == 5);
    REQUIRE(in_gamut(p));
    REQUIRE(p == gan.sample_palette(in, s));
  }
  CHECK(!(gan.sample_palette(in, 1) == gan.sample_palette(in, 2)));
  ContextInput bad = in;
  bad.category = 5;
  CHECK_THROWS_AS(gan.sample_palette(bad, 0), ValidationError);
}

TEST_CASE("perturbing the prefix changes later colors") {
  int changed = 0;
  std::mt19937_64 g(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    GanConfig c = toy::small_gan_config(8, 4, 8);
    c.seed = 1000 + trial;
    const PaletteGan gan(c);
    const ContextInput in = toy::dark_bright_context(trial % 2 == 0, 8);
    std::vector<Color> prefix;
    for (int i = 0; i < 3; ++i) prefix.push_back(Color::rgb(u(g), u(g), u(g)));
    std::vector<Color> other = prefix;
    other[0] = Color::rgb(u(g), u(g), u(g));
    Rng rng(trial);
    const Eigen::VectorXd z = standard_normal(4, 1, rng);
    changed += !(gan.generator_forward(z, gan.context(in, prefix)) == gan.generator_forward(z, gan.context(in, other)));
  }
  CHECK(changed >= 95);
}

TEST_CASE("toy dark/bright training separates lightness") {
  const auto data = toy::dark_bright(50, 8, 21);
  const auto examples = expand_training_examples(data.contexts, data.palettes);
  PaletteGan gan(toy::small_gan_config(16, 4, 8));
  TrainOptions o;
  o.steps = 2000;
  o.batch_size = 32;
  o.seed = 22;
  const auto start = std::chrono::steady_clock::now();
  train_palette_gan(gan, examples, o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double dark = 0.0, bright = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    dark += toy::mean_hsl_lightness(gan.sample_palette(data.dark_query, s)) / 20;
    bright += toy::mean_hsl_lightness(gan.sample_palette(data.bright_query, s)) / 20;
  }
  MESSAGE("dark=" << dark << " bright=" << bright << " seconds=" << secs);
  CHECK(dark + 0.1 <= bright);
  CHECK(secs < 600);
}
