#include "sdoa/sdoanet.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "sdoa/rng.hpp"

namespace sdoa::net {

namespace {

using Eigen::Index;

void glorot(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : w) x = dist(rng);
}

Eigen::Map<const RowMatrix> as_matrix(const std::vector<double>& v, int rows, int cols) {
  return {v.data(), rows, cols};
}
Eigen::Map<RowMatrix> as_matrix(std::vector<double>& v, int rows, int cols) {
  return {v.data(), rows, cols};
}

// Same-padded cross-correlation over the length axis. `in` and the result are
// B x (channels * length) with channel-major rows.
RowMatrix conv_forward(const RowMatrix& in, const ConvBlock& blk, const NetConfig& cfg) {
  const int ch = cfg.n_filters, len = cfg.inner_dim, taps = cfg.kernel_size;
  const int pad = taps / 2;
  RowMatrix out(in.rows(), in.cols());
  for (Index b = 0; b < in.rows(); ++b) {
    const double* x = in.row(b).data();
    double* y = out.row(b).data();
    for (int o = 0; o < ch; ++o) {
      for (int p = 0; p < len; ++p) {
        double acc = blk.bias[static_cast<size_t>(o)];
        for (int i = 0; i < ch; ++i) {
          const double* w = &blk.kernel[static_cast<size_t>((o * ch + i) * taps)];
          for (int t = 0; t < taps; ++t) {
            const int q = p + t - pad;
            if (q >= 0 && q < len) acc += w[t] * x[i * len + q];
          }
        }
        y[o * len + p] = acc;
      }
    }
  }
  return out;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string(what) + " is not finite");
}

}  // namespace

void NetConfig::validate() const {
  if (n_antennas < 1 || n_filters < 1 || inner_dim < 1 || n_conv_layers < 0 || batch_size < 1)
    throw std::invalid_argument("network dimensions must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("kernel size must be odd");
  if (!(learning_rate >= 0.0) || !(bn_epsilon > 0.0) || !(bn_momentum >= 0.0 && bn_momentum <= 1.0) ||
      !(output_init_scale >= 0.0) || !std::isfinite(output_init_scale))
    throw std::invalid_argument("invalid learning rate, BN parameters or output init scale");
}

NetworkParams NetworkParams::zeros(const NetConfig& cfg) {
  cfg.validate();
  const auto io = static_cast<size_t>(cfg.io_dim());
  const auto hid = static_cast<size_t>(cfg.hidden_dim());
  const auto ch = static_cast<size_t>(cfg.n_filters);
  NetworkParams p;
  p.cfg = cfg;
  p.fc_in_w.assign(io * hid, 0.0);
  p.fc_in_b.assign(hid, 0.0);
  p.blocks.resize(static_cast<size_t>(cfg.n_conv_layers));
  for (ConvBlock& b : p.blocks) {
    b.kernel.assign(ch * ch * static_cast<size_t>(cfg.kernel_size), 0.0);
    b.bias.assign(ch, 0.0);
    b.gamma.assign(ch, 0.0);
    b.beta.assign(ch, 0.0);
    b.running_mean.assign(ch, 0.0);
    b.running_var.assign(ch, 0.0);
  }
  p.fc_out_w.assign(hid * io, 0.0);
  p.fc_out_b.assign(io, 0.0);
  return p;
}

size_t NetworkParams::trainable_count() const {
  size_t n = 0;
  for_each_trainable([&](const std::string&, const std::vector<double>& v) { n += v.size(); });
  return n;
}

void NetworkParams::validate() const {
  cfg.validate();
  const NetworkParams ref = zeros(cfg);
  if (blocks.size() != ref.blocks.size())
    throw std::invalid_argument("network has the wrong number of convolution blocks");
  std::vector<size_t> sizes;
  ref.for_each_trainable([&](const std::string&, const std::vector<double>& v) { sizes.push_back(v.size()); });
  size_t i = 0;
  for_each_trainable([&](const std::string& name, const std::vector<double>& v) {
    if (v.size() != sizes[i++]) throw std::invalid_argument("tensor " + name + " has the wrong size");
    for (double x : v)
      if (!std::isfinite(x)) throw std::invalid_argument("tensor " + name + " is not finite");
  });
  for (const ConvBlock& b : blocks) {
    if (b.running_mean.size() != static_cast<size_t>(cfg.n_filters) ||
        b.running_var.size() != static_cast<size_t>(cfg.n_filters))
      throw std::invalid_argument("running statistics have the wrong size");
    for (double v : b.running_var)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("running variance must be positive");
  }
}

bool NetworkParams::operator==(const NetworkParams& o) const {
  if (!cfg.same_shape(o.cfg) || blocks.size() != o.blocks.size()) return false;
  for (size_t l = 0; l < blocks.size(); ++l)
    if (blocks[l].running_mean != o.blocks[l].running_mean ||
        blocks[l].running_var != o.blocks[l].running_var)
      return false;
  std::vector<const std::vector<double>*> mine;
  for_each_trainable([&](const std::string&, const std::vector<double>& v) { mine.push_back(&v); });
  size_t i = 0;
  bool same = true;
  o.for_each_trainable([&](const std::string&, const std::vector<double>& v) {
    if (*mine[i++] != v) same = false;
  });
  return same;
}

NetworkParams init_params(const NetConfig& cfg, std::uint64_t rng_seed) {
  NetworkParams p = NetworkParams::zeros(cfg);
  Rng rng(rng_seed);
  glorot(p.fc_in_w, cfg.io_dim(), cfg.hidden_dim(), rng);
  const int conv_fan = cfg.n_filters * cfg.kernel_size;
  for (ConvBlock& b : p.blocks) {
    glorot(b.kernel, conv_fan, conv_fan, rng);
    std::fill(b.gamma.begin(), b.gamma.end(), 1.0);
    std::fill(b.running_var.begin(), b.running_var.end(), 1.0);
  }
  glorot(p.fc_out_w, cfg.hidden_dim(), cfg.io_dim(), rng);
  for (double& w : p.fc_out_w) w *= cfg.output_init_scale;
  return p;
}

ForwardResult forward(const NetworkParams& params, const RowMatrix& batch, Mode mode) {
  const NetConfig& cfg = params.cfg;
  if (batch.cols() != cfg.io_dim())
    throw std::invalid_argument("forward: input width must be 2N");
  if (batch.rows() < 1) throw std::invalid_argument("forward: empty batch");
  if (mode == Mode::Train && batch.rows() < 2)
    throw std::invalid_argument("forward: train mode needs at least two rows");
  const int ch = cfg.n_filters, len = cfg.inner_dim;
  const Index rows = batch.rows();

  ForwardResult res;
  res.cache.mode = mode;
  res.cache.input = batch;

  RowMatrix h = batch * as_matrix(params.fc_in_w, cfg.io_dim(), cfg.hidden_dim());
  h.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.fc_in_b.data(), cfg.hidden_dim());

  for (const ConvBlock& blk : params.blocks) {
    BlockCache bc;
    bc.input = h;
    const RowMatrix conv = conv_forward(h, blk, cfg);
    bc.mean.assign(static_cast<size_t>(ch), 0.0);
    bc.var.assign(static_cast<size_t>(ch), 0.0);
    bc.inv_std.assign(static_cast<size_t>(ch), 0.0);
    const double count = static_cast<double>(rows * len);
    for (int c = 0; c < ch; ++c) {
      double mean = 0.0, var = 0.0;
      if (mode == Mode::Train) {
        const auto block = conv.middleCols(c * len, len);
        mean = block.sum() / count;
        var = (block.array() - mean).square().sum() / count;
      } else {
        mean = blk.running_mean[static_cast<size_t>(c)];
        var = blk.running_var[static_cast<size_t>(c)];
        if (!(var > 0.0) || !std::isfinite(var) || !std::isfinite(mean))
          throw std::invalid_argument("forward: running statistics are not initialized");
      }
      bc.mean[static_cast<size_t>(c)] = mean;
      bc.var[static_cast<size_t>(c)] = var;
      bc.inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + cfg.bn_epsilon);
    }
    bc.xhat.resize(rows, h.cols());
    bc.pre.resize(rows, h.cols());
    for (int c = 0; c < ch; ++c) {
      const auto cs = static_cast<size_t>(c);
      bc.xhat.middleCols(c * len, len) =
          (conv.middleCols(c * len, len).array() - bc.mean[cs]) * bc.inv_std[cs];
      bc.pre.middleCols(c * len, len) =
          bc.xhat.middleCols(c * len, len).array() * blk.gamma[cs] + blk.beta[cs];
    }
    h = bc.pre.cwiseMax(0.0);
    res.cache.blocks.push_back(std::move(bc));
  }

  res.cache.flat = h;
  res.output = h * as_matrix(params.fc_out_w, cfg.hidden_dim(), cfg.io_dim());
  res.output.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.fc_out_b.data(), cfg.io_dim());
  return res;
}

void update_running_stats(NetworkParams& params, const ForwardCache& cache) {
  if (cache.mode != Mode::Train) return;
  const double m = params.cfg.bn_momentum;
  const double count = static_cast<double>(cache.input.rows() * params.cfg.inner_dim);
  const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
  for (size_t l = 0; l < params.blocks.size(); ++l) {
    ConvBlock& b = params.blocks[l];
    const BlockCache& bc = cache.blocks[l];
    for (size_t c = 0; c < b.running_mean.size(); ++c) {
      b.running_mean[c] = (1.0 - m) * b.running_mean[c] + m * bc.mean[c];
      b.running_var[c] = (1.0 - m) * b.running_var[c] + m * bc.var[c] * unbias;
    }
  }
}

Eigen::VectorXd stack_real_imag(const CVector& r) {
  const Index n = r.size();
  Eigen::VectorXd y(2 * n);
  y.head(n) = r.real();
  y.tail(n) = r.imag();
  return y;
}

CVector to_complex(const Eigen::VectorXd& g) {
  if (g.size() % 2 != 0) throw std::invalid_argument("to_complex: odd length");
  const Index n = g.size() / 2;
  CVector z(n);
  for (Index i = 0; i < n; ++i) z(i) = cplx(g(i), g(n + i));
  return z;
}

namespace {

RowMatrix stack_batch(const std::vector<Snapshot>& batch, int n_antennas) {
  RowMatrix y(static_cast<Index>(batch.size()), 2 * n_antennas);
  for (size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].received.size() != n_antennas)
      throw std::invalid_argument("snapshot length differs from the network input size");
    y.row(static_cast<Index>(b)) = stack_real_imag(batch[b].received).transpose();
  }
  return y;
}

struct SpectrumFit {
  double loss = 0.0;
  RowMatrix d_output;  // dL/dG, B x 2N
};

// Loss of |a^H z|^2 against the Gaussian references, and its gradient in the
// stacked real/imag output coordinates.
SpectrumFit spectrum_fit(const RowMatrix& output, const std::vector<Snapshot>& batch,
                         const LossTarget& target, bool want_grad) {
  const SteeringTable& table = *target.table;
  const Index n = table.n_antennas();
  const Index rows = output.rows();
  const double omega = table.grid().size();

  CMatrix z(n, rows);
  for (Index b = 0; b < rows; ++b)
    for (Index i = 0; i < n; ++i) z(i, b) = cplx(output(b, i), output(b, n + i));
  const CMatrix u = table.conj_rows() * z;  // Omega x B

  SpectrumFit fit;
  CMatrix weighted(u.rows(), rows);
  double total = 0.0;
  for (Index b = 0; b < rows; ++b) {
    const Spectrum ref = reference_spectrum(batch[static_cast<size_t>(b)].truth, target.amplitude,
                                            target.sigma_bar, static_cast<int>(n), table.grid());
    double acc = 0.0;
    for (Index w = 0; w < u.rows(); ++w) {
      const double diff = std::norm(u(w, b)) - ref.values[static_cast<size_t>(w)];
      acc += diff * diff;
      weighted(w, b) = diff * u(w, b);
    }
    total += acc / omega;
  }
  fit.loss = total / static_cast<double>(rows);
  if (!want_grad) return fit;

  // d|u|^2 / d(Re z + j Im z) = 2 u a; chain through (1/Omega) sum diff^2
  // and the batch mean.
  const CMatrix dz = table.rows().transpose() * weighted * (4.0 / (omega * static_cast<double>(rows)));
  fit.d_output.resize(rows, 2 * n);
  for (Index b = 0; b < rows; ++b)
    for (Index i = 0; i < n; ++i) {
      fit.d_output(b, i) = dz(i, b).real();
      fit.d_output(b, n + i) = dz(i, b).imag();
    }
  return fit;
}

}  // namespace

double batch_loss(const NetworkParams& params, const std::vector<Snapshot>& batch,
                  const LossTarget& target) {
  if (target.table == nullptr) throw std::invalid_argument("loss target has no steering table");
  const ForwardResult fr = forward(params, stack_batch(batch, params.cfg.n_antennas), Mode::Train);
  return spectrum_fit(fr.output, batch, target, false).loss;
}

LossResult loss_and_grad(const NetworkParams& params, const std::vector<Snapshot>& batch,
                         const LossTarget& target) {
  if (target.table == nullptr) throw std::invalid_argument("loss target has no steering table");
  if (target.table->n_antennas() != params.cfg.n_antennas)
    throw std::invalid_argument("steering table does not match the network");
  const NetConfig& cfg = params.cfg;
  const int ch = cfg.n_filters, len = cfg.inner_dim, taps = cfg.kernel_size;
  const int pad = taps / 2;

  ForwardResult fr = forward(params, stack_batch(batch, cfg.n_antennas), Mode::Train);
  SpectrumFit fit = spectrum_fit(fr.output, batch, target, true);
  check_finite(fit.loss, "training loss");

  LossResult res;
  res.loss = fit.loss;
  res.grads = NetworkParams::zeros(cfg);
  NetworkParams& g = res.grads;
  const ForwardCache& cache = fr.cache;
  const RowMatrix& d_out = fit.d_output;
  const Index rows = d_out.rows();

  as_matrix(g.fc_out_w, cfg.hidden_dim(), cfg.io_dim()) = cache.flat.transpose() * d_out;
  Eigen::Map<Eigen::RowVectorXd>(g.fc_out_b.data(), cfg.io_dim()) = d_out.colwise().sum();
  RowMatrix dh = d_out * as_matrix(params.fc_out_w, cfg.hidden_dim(), cfg.io_dim()).transpose();

  for (Index l = static_cast<Index>(params.blocks.size()) - 1; l >= 0; --l) {
    const ConvBlock& blk = params.blocks[static_cast<size_t>(l)];
    const BlockCache& bc = cache.blocks[static_cast<size_t>(l)];
    ConvBlock& gb = g.blocks[static_cast<size_t>(l)];

    // ReLU
    RowMatrix dpre = (bc.pre.array() > 0.0).select(dh, 0.0);

    // Batch norm over (batch x length) per channel.
    RowMatrix dconv(rows, dh.cols());
    const double count = static_cast<double>(rows * len);
    for (int c = 0; c < ch; ++c) {
      const auto cs = static_cast<size_t>(c);
      const auto dp = dpre.middleCols(c * len, len);
      const auto xh = bc.xhat.middleCols(c * len, len);
      gb.gamma[cs] = (dp.array() * xh.array()).sum();
      gb.beta[cs] = dp.sum();
      const Eigen::ArrayXXd dxhat = dp.array() * blk.gamma[cs];
      const double sum_dx = dxhat.sum();
      const double sum_dx_xh = (dxhat * xh.array()).sum();
      dconv.middleCols(c * len, len) =
          (bc.inv_std[cs] / count) * (count * dxhat - sum_dx - xh.array() * sum_dx_xh);
    }

    // Convolution.
    dh.setZero(rows, dconv.cols());
    for (Index b = 0; b < rows; ++b) {
      const double* x = bc.input.row(b).data();
      const double* dy = dconv.row(b).data();
      double* dx = dh.row(b).data();
      for (int o = 0; o < ch; ++o) {
        for (int p = 0; p < len; ++p) {
          const double gy = dy[o * len + p];
          gb.bias[static_cast<size_t>(o)] += gy;
          for (int i = 0; i < ch; ++i) {
            const size_t base = static_cast<size_t>((o * ch + i) * taps);
            for (int t = 0; t < taps; ++t) {
              const int q = p + t - pad;
              if (q < 0 || q >= len) continue;
              gb.kernel[base + static_cast<size_t>(t)] += gy * x[i * len + q];
              dx[i * len + q] += gy * blk.kernel[base + static_cast<size_t>(t)];
            }
          }
        }
      }
    }
  }

  as_matrix(g.fc_in_w, cfg.io_dim(), cfg.hidden_dim()) = cache.input.transpose() * dh;
  Eigen::Map<Eigen::RowVectorXd>(g.fc_in_b.data(), cfg.hidden_dim()) = dh.colwise().sum();

  res.cache = std::move(fr.cache);
  return res;
}

AdamState AdamState::fresh(const NetConfig& cfg) {
  AdamState s;
  s.m = NetworkParams::zeros(cfg);
  s.v = NetworkParams::zeros(cfg);
  return s;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, double lr) {
  if (!params.cfg.same_shape(grads.cfg) || !params.cfg.same_shape(state.m.cfg))
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  std::vector<const std::vector<double>*> gv;
  grads.for_each_trainable([&](const std::string&, const std::vector<double>& v) { gv.push_back(&v); });
  std::vector<std::vector<double>*> mv, vv;
  state.m.for_each_trainable([&](const std::string&, std::vector<double>& v) { mv.push_back(&v); });
  state.v.for_each_trainable([&](const std::string&, std::vector<double>& v) { vv.push_back(&v); });

  size_t t = 0;
  params.for_each_trainable([&](const std::string& name, std::vector<double>& p) {
    const std::vector<double>& g = *gv[t];
    std::vector<double>& m = *mv[t];
    std::vector<double>& v = *vv[t];
    ++t;
    if (g.size() != p.size() || m.size() != p.size())
      throw std::invalid_argument("adam_step: tensor " + name + " has mismatched size");
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  });
}

TrainResult train_from(const TrainConfig& cfg, NetworkParams params, AdamState& adam,
                       const EpochCallback& on_epoch) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.samples_per_epoch < 2) throw std::invalid_argument("train: need at least 2 samples per epoch");
  cfg.net.validate();
  if (cfg.data.array.n_antennas != cfg.net.n_antennas)
    throw std::invalid_argument("train: array size differs from the network input");

  const SteeringTable table(AngleGrid::full(cfg.train_grid_points), cfg.data.array.positions,
                            cfg.data.array.wavelength);
  const LossTarget target{&table, cfg.sigma_bar, 1.0};
  const auto batch_size = static_cast<size_t>(cfg.net.batch_size);

  TrainResult out;
  if (cfg.start_epoch < 0) throw std::invalid_argument("train: negative start epoch");
  for (int epoch = cfg.start_epoch; epoch < cfg.start_epoch + cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = curriculum_stage_for(epoch);

    DatasetSpec spec = cfg.data;
    spec.stage_schedule = {rec.stage};
    spec.n_samples = cfg.samples_per_epoch;
    spec.seed = derive_seed(cfg.seed, SeedStream::Epoch,
                            cfg.fixed_dataset ? 0 : static_cast<std::uint64_t>(epoch));
    const std::vector<Snapshot> data = generate_dataset(spec);

    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < data.size(); start += batch_size) {
      const size_t stop = std::min(start + batch_size, data.size());
      if (stop - start < 2) break;  // batch norm needs two rows
      const std::vector<Snapshot> batch(data.begin() + static_cast<std::ptrdiff_t>(start),
                                        data.begin() + static_cast<std::ptrdiff_t>(stop));
      LossResult lr;
      try {
        lr = loss_and_grad(params, batch, target);
      } catch (const std::runtime_error& e) {
        rec.mean_loss = NAN;
        out.history.push_back(rec);
        throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) +
                                   ": " + e.what(),
                               out.history);
      }
      update_running_stats(params, lr.cache);
      adam_step(params, lr.grads, adam, cfg.net.learning_rate);
      loss_sum += lr.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    rec.mean_loss = loss_sum / static_cast<double>(seen);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  out.params = std::move(params);
  return out;
}

TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch) {
  AdamState adam = AdamState::fresh(cfg.net);
  return train_from(cfg, init_params(cfg.net, derive_seed(cfg.seed, SeedStream::Init, 0)), adam,
                    on_epoch);
}

NetEstimate estimate(const NetworkParams& params, const CVector& r, const SteeringTable& table,
                     int k) {
  RowMatrix in(1, params.cfg.io_dim());
  if (r.size() != params.cfg.n_antennas)
    throw std::invalid_argument("estimate: snapshot length differs from the network input size");
  in.row(0) = stack_real_imag(r).transpose();
  const ForwardResult fr = forward(params, in, Mode::Eval);
  NetEstimate out{to_complex(fr.output.row(0).transpose()), Spectrum{table.grid(), {}}, {}};
  out.spectrum = eval_spectrum(out.z, table);
  out.estimate = find_peaks(out.spectrum, k);
  return out;
}

}  // namespace sdoa::net
