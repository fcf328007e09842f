#include "doctest.h"

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "sdoa/rng.hpp"
#include "sdoa/sdoanet.hpp"

using namespace sdoa;
using namespace sdoa::net;

namespace {

NetConfig small_config() {
  NetConfig c;
  c.n_antennas = 4;
  c.n_filters = 2;
  c.inner_dim = 6;
  c.n_conv_layers = 2;
  c.kernel_size = 3;
  c.batch_size = 5;
  return c;
}

// Fills every tensor, buffers included, with random values.
NetworkParams random_params(const NetConfig& cfg, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  p.for_each_trainable([&](const std::string&, std::vector<double>& v) {
    for (double& x : v) x = n(rng);
  });
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (ConvBlock& b : p.blocks) {
    for (double& x : b.running_mean) x = n(rng);
    for (double& x : b.running_var) x = u(rng);
  }
  return p;
}

// Layer-by-layer scalar reference of the network, independent of the
// matrix implementation.
std::vector<std::vector<double>> reference_forward(const NetworkParams& p,
                                                   const std::vector<std::vector<double>>& in,
                                                   bool train) {
  const NetConfig& c = p.cfg;
  const int io = c.io_dim(), hid = c.hidden_dim(), ch = c.n_filters, len = c.inner_dim;
  const int taps = c.kernel_size, pad = taps / 2;
  std::vector<std::vector<double>> h(in.size(), std::vector<double>(static_cast<size_t>(hid)));
  for (size_t b = 0; b < in.size(); ++b)
    for (int j = 0; j < hid; ++j) {
      double s = p.fc_in_b[static_cast<size_t>(j)];
      for (int i = 0; i < io; ++i) s += in[b][static_cast<size_t>(i)] * p.fc_in_w[static_cast<size_t>(i * hid + j)];
      h[b][static_cast<size_t>(j)] = s;
    }
  for (const ConvBlock& blk : p.blocks) {
    auto conv = h;
    for (size_t b = 0; b < in.size(); ++b)
      for (int o = 0; o < ch; ++o)
        for (int q = 0; q < len; ++q) {
          double s = blk.bias[static_cast<size_t>(o)];
          for (int i = 0; i < ch; ++i)
            for (int t = 0; t < taps; ++t) {
              const int src = q + t - pad;
              if (src >= 0 && src < len)
                s += blk.kernel[static_cast<size_t>((o * ch + i) * taps + t)] * h[b][static_cast<size_t>(i * len + src)];
            }
          conv[b][static_cast<size_t>(o * len + q)] = s;
        }
    for (int o = 0; o < ch; ++o) {
      double mean = blk.running_mean[static_cast<size_t>(o)];
      double var = blk.running_var[static_cast<size_t>(o)];
      if (train) {
        double s = 0.0, s2 = 0.0;
        for (size_t b = 0; b < in.size(); ++b)
          for (int q = 0; q < len; ++q) s += conv[b][static_cast<size_t>(o * len + q)];
        mean = s / static_cast<double>(in.size() * static_cast<size_t>(len));
        for (size_t b = 0; b < in.size(); ++b)
          for (int q = 0; q < len; ++q) s2 += std::pow(conv[b][static_cast<size_t>(o * len + q)] - mean, 2);
        var = s2 / static_cast<double>(in.size() * static_cast<size_t>(len));
      }
      for (size_t b = 0; b < in.size(); ++b)
        for (int q = 0; q < len; ++q) {
          double& v = conv[b][static_cast<size_t>(o * len + q)];
          v = (v - mean) / std::sqrt(var + c.bn_epsilon) * blk.gamma[static_cast<size_t>(o)] + blk.beta[static_cast<size_t>(o)];
          v = std::max(v, 0.0);
        }
    }
    h = conv;
  }
  std::vector<std::vector<double>> out(in.size(), std::vector<double>(static_cast<size_t>(io)));
  for (size_t b = 0; b < in.size(); ++b)
    for (int j = 0; j < io; ++j) {
      double s = p.fc_out_b[static_cast<size_t>(j)];
      for (int i = 0; i < hid; ++i) s += h[b][static_cast<size_t>(i)] * p.fc_out_w[static_cast<size_t>(i * io + j)];
      out[b][static_cast<size_t>(j)] = s;
    }
  return out;
}

RowMatrix random_batch(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

std::vector<std::vector<double>> to_rows(const RowMatrix& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).data(), m.row(i).data() + m.cols());
  return out;
}

std::vector<Snapshot> random_snapshots(int count, int n_antennas, std::uint64_t seed) {
  DatasetSpec spec;
  spec.array = ArrayConfig::ula(n_antennas);
  spec.doa.k = 2;
  spec.n_samples = count;
  spec.seed = seed;
  spec.stage_schedule = {CurriculumStage::AllEffects};
  return generate_dataset(spec);
}

TrainConfig tiny_train_config() {
  TrainConfig tc;
  tc.net = small_config();
  tc.net.n_antennas = 8;
  tc.data.array = ArrayConfig::ula(8);
  tc.data.doa.k = 2;
  tc.epochs = 7;
  tc.samples_per_epoch = 12;
  tc.train_grid_points = 61;
  tc.seed = 3;
  return tc;
}

}  // namespace

TEST_SUITE("sdoanet") {

TEST_CASE("parameter shapes and initialization") {
  const NetConfig cfg;  // defaults: 2 filters, inner width 32
  const NetworkParams p = init_params(cfg, 42);
  CHECK(p.fc_in_w.size() == 2048);
  CHECK(p.fc_in_b.size() == 64);
  CHECK(p.fc_out_w.size() == 2048);
  CHECK(p.fc_out_b.size() == 32);
  REQUIRE(p.blocks.size() == 6);
  for (const ConvBlock& b : p.blocks) {
    CHECK(b.kernel.size() == 12);
    for (double v : b.running_var) CHECK(v == 1.0);
    for (double v : b.running_mean) CHECK(v == 0.0);
    for (double v : b.gamma) CHECK(v == 1.0);
    for (double v : b.beta) CHECK(v == 0.0);
    const double lim = std::sqrt(6.0 / 12.0);
    for (double v : b.kernel) CHECK(std::abs(v) <= lim);
  }
  const double lim_in = std::sqrt(6.0 / (32 + 64));
  for (double v : p.fc_in_w) CHECK(std::abs(v) <= lim_in);
  for (double v : p.fc_out_w) CHECK(std::abs(v) <= lim_in);
  NetConfig scaled = cfg;
  scaled.output_init_scale = 0.05;
  const NetworkParams q = init_params(scaled, 42);
  for (size_t i = 0; i < q.fc_out_w.size(); ++i) CHECK(q.fc_out_w[i] == doctest::Approx(0.05 * p.fc_out_w[i]));
  CHECK(q.fc_in_w == p.fc_in_w);
  CHECK(init_params(cfg, 42) == p);
  CHECK_FALSE(init_params(cfg, 43) == p);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("config validation") {
  NetConfig c;
  c.kernel_size = 4;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = NetConfig{};
  c.inner_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("forward matches the scalar reference") {
  const NetworkParams p = random_params(small_config(), 1);
  const RowMatrix batch = random_batch(5, 8, 2);
  for (bool train : {false, true}) {
    const ForwardResult fr = forward(p, batch, train ? Mode::Train : Mode::Eval);
    const auto want = reference_forward(p, to_rows(batch), train);
    for (int b = 0; b < 5; ++b)
      for (int j = 0; j < 8; ++j) CHECK(fr.output(b, j) == doctest::Approx(want[static_cast<size_t>(b)][static_cast<size_t>(j)]).epsilon(1e-12));
  }
}

TEST_CASE("zero input in eval mode") {
  const NetworkParams p = random_params(small_config(), 9);
  const RowMatrix zero = RowMatrix::Zero(1, 8);
  const auto want = reference_forward(p, to_rows(zero), false);
  const RowMatrix got = forward(p, zero, Mode::Eval).output;
  for (int j = 0; j < 8; ++j) CHECK(std::abs(got(0, j) - want[0][static_cast<size_t>(j)]) < 1e-12);
}

TEST_CASE("duplicating every row leaves train-mode outputs unchanged") {
  const NetworkParams p = random_params(small_config(), 4);
  const RowMatrix batch = random_batch(3, 8, 5);
  RowMatrix doubled(6, 8);
  doubled << batch, batch;
  const RowMatrix once = forward(p, batch, Mode::Train).output;
  const RowMatrix twice = forward(p, doubled, Mode::Train).output;
  CHECK((twice.topRows(3) - once).norm() < 1e-10 * once.norm());
  CHECK((twice.bottomRows(3) - once).norm() < 1e-10 * once.norm());
}

TEST_CASE("batch norm statistics and activations") {
  const NetworkParams p = init_params(NetConfig{}, 7);
  const RowMatrix batch = random_batch(64, 32, 8);
  const ForwardResult fr = forward(p, batch, Mode::Train);
  CHECK(fr.output.rows() == 64);
  CHECK(fr.output.cols() == 32);
  for (const BlockCache& bc : fr.cache.blocks) {
    CHECK(bc.input.cols() == 64);
    for (int c = 0; c < 2; ++c) {
      const auto x = bc.xhat.middleCols(c * 32, 32);
      const double mean = x.mean();
      const double var = (x.array() - mean).square().mean();
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(var - 1.0) < 1e-4);  // eps = 1e-5 shrinks the variance slightly
      CHECK(var * (bc.var[static_cast<size_t>(c)] + 1e-5) / bc.var[static_cast<size_t>(c)] == doctest::Approx(1.0).epsilon(1e-8));
    }
    CHECK(bc.pre.cwiseMax(0.0).minCoeff() >= 0.0);
  }
  CHECK(fr.cache.flat.minCoeff() >= 0.0);
}

TEST_CASE("forward errors") {
  NetworkParams p = init_params(small_config(), 1);
  CHECK_THROWS_AS(forward(p, RowMatrix::Zero(2, 7), Mode::Eval), std::invalid_argument);
  CHECK_THROWS_AS(forward(p, RowMatrix::Zero(1, 8), Mode::Train), std::invalid_argument);
  p.blocks[0].running_var[0] = 0.0;
  CHECK_THROWS_AS(forward(p, RowMatrix::Zero(1, 8), Mode::Eval), std::invalid_argument);
}

TEST_CASE("eval mode is a pure function of its input") {
  const NetworkParams p = random_params(small_config(), 3);
  const RowMatrix a = random_batch(3, 8, 1);
  RowMatrix b = a;
  b.row(2) = random_batch(1, 8, 99);
  const RowMatrix oa = forward(p, a, Mode::Eval).output;
  const RowMatrix ob = forward(p, b, Mode::Eval).output;
  CHECK(oa.topRows(2) == ob.topRows(2));
  CHECK(forward(p, a, Mode::Eval).output == oa);
}

TEST_CASE("to_complex and stacking") {
  Eigen::VectorXd g(4);
  g << 1, 2, 3, 4;
  const CVector z = to_complex(g);
  CHECK(z(0) == cplx(1, 3));
  CHECK(z(1) == cplx(2, 4));
  CHECK(to_complex(Eigen::VectorXd::Zero(6)).norm() == 0.0);
  CHECK_THROWS_AS(to_complex(Eigen::VectorXd::Zero(3)), std::invalid_argument);
  std::mt19937_64 rng(1);
  const CVector r = testutil::random_vector(rng, 16);
  CHECK(to_complex(stack_real_imag(r)) == r);
}

TEST_CASE("running statistics update") {
  NetworkParams p = init_params(small_config(), 2);
  const ForwardResult fr = forward(p, random_batch(5, 8, 3), Mode::Train);
  const NetworkParams before = p;
  update_running_stats(p, fr.cache);
  const double n = 5.0 * 6.0;
  for (size_t l = 0; l < p.blocks.size(); ++l)
    for (size_t c = 0; c < 2; ++c) {
      CHECK(p.blocks[l].running_mean[c] == doctest::Approx(0.9 * before.blocks[l].running_mean[c] + 0.1 * fr.cache.blocks[l].mean[c]));
      CHECK(p.blocks[l].running_var[c] == doctest::Approx(0.9 * before.blocks[l].running_var[c] + 0.1 * fr.cache.blocks[l].var[c] * n / (n - 1)));
    }
}

TEST_CASE("loss vanishes at an exact fit") {
  const NetworkParams p = NetworkParams::zeros(small_config());
  const SteeringTable table(AngleGrid::full(31), ArrayConfig::ula(4).positions);
  const LossResult res = loss_and_grad(p, random_snapshots(4, 4, 1), LossTarget{&table, 100.0, 0.0});
  CHECK(res.loss == 0.0);
  res.grads.for_each_trainable([](const std::string&, const std::vector<double>& v) {
    for (double x : v) CHECK(x == 0.0);
  });
}

TEST_CASE("duplicated batch leaves the loss unchanged") {
  const NetworkParams p = init_params(small_config(), 5);
  const SteeringTable table(AngleGrid::full(61), ArrayConfig::ula(4).positions);
  const LossTarget target{&table, 100.0, 1.0};
  auto batch = random_snapshots(5, 4, 2);
  const double single = batch_loss(p, batch, target);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  CHECK(batch_loss(p, doubled, target) == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("gradients match central differences") {
  const NetworkParams p = random_params(small_config(), 11);
  const SteeringTable table(AngleGrid::full(61), ArrayConfig::ula(4).positions);
  const LossTarget target{&table, 100.0, 1.0};
  const auto batch = random_snapshots(5, 4, 3);
  const LossResult res = loss_and_grad(p, batch, target);
  CHECK(res.loss == doctest::Approx(batch_loss(p, batch, target)).epsilon(1e-14));

  std::vector<const std::vector<double>*> analytic;
  res.grads.for_each_trainable([&](const std::string&, const std::vector<double>& v) { analytic.push_back(&v); });
  size_t group = 0;
  NetworkParams probe = p;
  probe.for_each_trainable([&](const std::string& name, std::vector<double>& v) {
    const std::vector<double>& g = *analytic[group++];
    for (size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      const double h = 1e-5;
      v[i] = keep + h;
      const double up = batch_loss(probe, batch, target);
      v[i] = keep - h;
      const double down = batch_loss(probe, batch, target);
      v[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3});
      INFO(name << "[" << i << "] fd " << fd << " analytic " << g[i]);
      CHECK(std::abs(fd - g[i]) / denom < 1e-4);
    }
  });
}

TEST_CASE("adam") {
  const NetConfig cfg = small_config();
  NetworkParams p = init_params(cfg, 1);
  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState st = AdamState::fresh(cfg);
    const NetworkParams before = p;
    adam_step(p, NetworkParams::zeros(cfg), st, 1e-3);
    CHECK(p == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves every coordinate by about lr") {
    AdamState st = AdamState::fresh(cfg);
    NetworkParams g = random_params(cfg, 2);
    const NetworkParams before = p;
    adam_step(p, g, st, 1e-3);
    std::vector<const std::vector<double>*> gv, bv;
    g.for_each_trainable([&](const std::string&, const std::vector<double>& v) { gv.push_back(&v); });
    before.for_each_trainable([&](const std::string&, const std::vector<double>& v) { bv.push_back(&v); });
    size_t k = 0;
    p.for_each_trainable([&](const std::string&, const std::vector<double>& v) {
      for (size_t i = 0; i < v.size(); ++i) {
        const double gi = (*gv[k])[i];
        const double want = -1e-3 * gi / (std::abs(gi) + 1e-8);
        CHECK(v[i] - (*bv[k])[i] == doctest::Approx(want).epsilon(1e-6));
      }
      ++k;
    });
  }
  SUBCASE("deterministic") {
    AdamState s1 = AdamState::fresh(cfg), s2 = AdamState::fresh(cfg);
    NetworkParams a = p, b = p;
    const NetworkParams g = random_params(cfg, 3);
    adam_step(a, g, s1, 1e-3);
    adam_step(b, g, s2, 1e-3);
    CHECK(a == b);
  }
  SUBCASE("shape mismatch") {
    AdamState st = AdamState::fresh(cfg);
    CHECK_THROWS_AS(adam_step(p, NetworkParams::zeros(NetConfig{}), st, 1e-3), std::invalid_argument);
  }
}

TEST_CASE("training follows the curriculum") {
  const TrainResult res = train(tiny_train_config());
  REQUIRE(res.history.size() == 7);
  for (int e = 0; e < 7; ++e) {
    CHECK(res.history[static_cast<size_t>(e)].stage == stage_from_index(e));
    CHECK(std::isfinite(res.history[static_cast<size_t>(e)].mean_loss));
  }
  CHECK_NOTHROW(res.params.validate());
  CHECK_NOTHROW(forward(res.params, RowMatrix::Zero(1, 16), Mode::Eval));
}

TEST_CASE("training is deterministic") {
  const TrainResult a = train(tiny_train_config());
  const TrainResult b = train(tiny_train_config());
  CHECK(a.params == b.params);
  for (size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
}

TEST_CASE("zero learning rate keeps the trainable parameters") {
  TrainConfig tc = tiny_train_config();
  tc.epochs = 1;
  tc.net.learning_rate = 0.0;
  const TrainResult res = train(tc);
  NetworkParams init = init_params(tc.net, derive_seed(tc.seed, SeedStream::Init, 0));
  std::vector<std::vector<double>> before, after;
  init.for_each_trainable([&](const std::string&, const std::vector<double>& v) { before.push_back(v); });
  res.params.for_each_trainable([&](const std::string&, const std::vector<double>& v) { after.push_back(v); });
  CHECK(before == after);
  // Running statistics still track the batches.
  CHECK(res.params.blocks[0].running_mean != init.blocks[0].running_mean);
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  TrainConfig tc = tiny_train_config();
  const TrainResult full = train(tc);
  tc.epochs = 3;
  AdamState adam = AdamState::fresh(tc.net);
  const TrainResult first = train_from(tc, init_params(tc.net, derive_seed(tc.seed, SeedStream::Init, 0)), adam);
  tc.start_epoch = 3;
  tc.epochs = 4;
  const TrainResult rest = train_from(tc, first.params, adam);
  CHECK(rest.params == full.params);
  CHECK(rest.history.front().stage == CurriculumStage::InconsistentPhases);
}

TEST_CASE("divergence reports the partial history") {
  TrainConfig tc = tiny_train_config();
  tc.epochs = 3;
  tc.data.snr_min_db = tc.data.snr_max_db = -4000.0;  // infinite noise
  try {
    train(tc);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    REQUIRE(e.history().size() == 1);
    CHECK(std::isnan(e.history()[0].mean_loss));
  }
}

TEST_CASE("estimate on untrained parameters") {
  const NetworkParams p = init_params(NetConfig{}, 2);
  const SteeringTable table(AngleGrid::full(1801), ArrayConfig::ula(16).positions);
  const auto snaps = random_snapshots(1, 16, 4);
  const NetEstimate e = estimate(p, snaps[0].received, table, 3);
  CHECK(e.spectrum.values.size() == 1801);
  for (double v : e.spectrum.values) CHECK(v >= 0.0);
  CHECK(e.estimate.doas_deg.size() == 3);
  const NetEstimate again = estimate(p, snaps[0].received, table, 3);
  CHECK(again.z == e.z);
}

}  // TEST_SUITE
