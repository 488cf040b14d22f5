#include "tpc/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <json.hpp>

#include "tpc/serde.hpp"

namespace tpc::neural {

namespace {

constexpr double kCrossEntropyEps = 1e-12;
constexpr std::uint16_t kModelVersion = 1;

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void fill_uniform(Matrix& m, double limit, Rng& rng) {
  for (double& v : m.data) v = rng.uniform(-limit, limit);
}

double kernel_limit(const KernelInitSpec& spec, int fan_in, int fan_out) {
  switch (spec.kind) {
    case KernelInit::GlorotUniform:
      return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    case KernelInit::HeUniform:
      return std::sqrt(6.0 / static_cast<double>(fan_in));
    case KernelInit::ScaledUniform:
      return spec.limit;
  }
  return 0.0;
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::BadShape, std::string(what) + " is not finite");
  }
}

}  // namespace

void HyperParams::validate() const {
  if (output_size < 1) throw Error(Errc::BadShape, "output_size must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw Error(Errc::BadShape, "dropout_rate must be in [0,1)");
  }
  if (batch_size < 1) throw Error(Errc::BadShape, "batch_size must be >= 1");
  if (num_layers < 1) throw Error(Errc::BadShape, "num_layers must be >= 1");
  if (epochs < 0) throw Error(Errc::BadShape, "epochs must be >= 0");
  if (optimizer.learning_rate <= 0.0) throw Error(Errc::BadShape, "learning rate must be > 0");
}

ModelParams init_params(const HyperParams& hp, int input_width, int num_classes) {
  hp.validate();
  if (input_width < 1) throw Error(Errc::BadShape, "input_width must be >= 1");
  if (num_classes < 2) throw Error(Errc::BadShape, "need at least 2 classes");
  const int h = hp.output_size;
  Rng rng(hp.seed);
  ModelParams model;
  model.num_classes = num_classes;
  for (int l = 0; l < hp.num_layers; ++l) {
    const int fan_in = l == 0 ? input_width : h;
    LstmLayerParams layer;
    layer.w = Matrix(4 * h, fan_in);
    fill_uniform(layer.w, kernel_limit(hp.kernel_init, fan_in, h), rng);
    layer.u = Matrix(4 * h, h);
    if (hp.recurrent_init.kind == RecurrentInit::GlorotUniform) {
      fill_uniform(layer.u, std::sqrt(6.0 / static_cast<double>(h + h)), rng);
    } else {
      // gain * I replicated across the four gate blocks
      for (int gate = 0; gate < 4; ++gate) {
        for (int r = 0; r < h; ++r) layer.u.at(gate * h + r, r) = hp.recurrent_init.gain;
      }
    }
    layer.b.assign(static_cast<std::size_t>(4) * h, 0.0);
    for (int r = 0; r < h; ++r) layer.b[static_cast<std::size_t>(h + r)] = 1.0;  // forget gate
    model.layers.push_back(std::move(layer));
  }
  model.head_w = Matrix(num_classes, h);
  fill_uniform(model.head_w, kernel_limit(hp.kernel_init, h, num_classes), rng);
  model.head_b.assign(static_cast<std::size_t>(num_classes), 0.0);
  return model;
}

OptimizerState init_optimizer_state(const ModelParams& model) {
  OptimizerState state;
  state.m = model;
  state.v = model;
  auto zero = [](ModelParams& p) {
    for (LstmLayerParams& l : p.layers) {
      std::fill(l.w.data.begin(), l.w.data.end(), 0.0);
      std::fill(l.u.data.begin(), l.u.data.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    std::fill(p.head_w.data.begin(), p.head_w.data.end(), 0.0);
    std::fill(p.head_b.begin(), p.head_b.end(), 0.0);
  };
  zero(state.m);
  zero(state.v);
  state.t = 0;
  return state;
}

StepCache lstm_step(const LstmLayerParams& layer, const std::vector<double>& x,
                    const std::vector<double>& h_prev, const std::vector<double>& c_prev) {
  const int h = layer.hidden();
  if (static_cast<int>(x.size()) != layer.input_width() ||
      static_cast<int>(h_prev.size()) != h || static_cast<int>(c_prev.size()) != h) {
    throw Error(Errc::ShapeMismatch, "lstm_step input shapes");
  }
  std::vector<double> z = matvec(layer.w, x);
  const std::vector<double> uh = matvec(layer.u, h_prev);
  for (std::size_t k = 0; k < z.size(); ++k) z[k] += uh[k] + layer.b[k];

  StepCache cache;
  cache.i.resize(static_cast<std::size_t>(h));
  cache.f.resize(static_cast<std::size_t>(h));
  cache.g.resize(static_cast<std::size_t>(h));
  cache.o.resize(static_cast<std::size_t>(h));
  cache.c.resize(static_cast<std::size_t>(h));
  cache.tanh_c.resize(static_cast<std::size_t>(h));
  cache.h.resize(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) {
    const std::size_t k = static_cast<std::size_t>(r);
    cache.i[k] = stable_sigmoid(z[k]);
    cache.f[k] = stable_sigmoid(z[static_cast<std::size_t>(h) + k]);
    cache.g[k] = std::tanh(z[static_cast<std::size_t>(2 * h) + k]);
    cache.o[k] = stable_sigmoid(z[static_cast<std::size_t>(3 * h) + k]);
    cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = cache.o[k] * cache.tanh_c[k];
  }
  return cache;
}

ForwardResult forward(const ModelParams& model, const std::vector<Matrix>& batch,
                      bool train_mode, double dropout_rate, Rng* dropout_rng) {
  if (model.layers.empty()) throw Error(Errc::BadShape, "model has no layers");
  if (batch.empty()) throw Error(Errc::EmptyDataset, "empty batch");
  const int window_length = batch.front().rows;
  const int input_width = batch.front().cols;
  if (input_width != model.input_width()) {
    throw Error(Errc::ShapeMismatch, "window width does not match model input width");
  }
  const int h = model.hidden();
  const int num_layers = static_cast<int>(model.layers.size());
  const bool apply_dropout = train_mode && dropout_rate > 0.0 && num_layers > 1;
  if (apply_dropout && !dropout_rng) {
    throw Error(Errc::BadShape, "dropout requires an rng in train mode");
  }

  ForwardResult out;
  out.train_mode = train_mode;
  out.window_length = window_length;
  out.input_width = input_width;
  out.hidden = h;
  out.num_layers = num_layers;
  out.num_classes = model.num_classes;
  out.samples.reserve(batch.size());

  const double keep_scale = 1.0 / (1.0 - dropout_rate);
  for (const Matrix& window : batch) {
    if (window.rows != window_length || window.cols != input_width) {
      throw Error(Errc::ShapeMismatch, "all windows in a batch must share one shape");
    }
    SampleCache sc;
    sc.inputs.resize(static_cast<std::size_t>(num_layers));
    sc.steps.resize(static_cast<std::size_t>(num_layers));
    if (apply_dropout) sc.dropout_masks.resize(static_cast<std::size_t>(num_layers - 1));

    for (int t = 0; t < window_length; ++t) {
      std::vector<double> row(static_cast<std::size_t>(input_width));
      for (int c = 0; c < input_width; ++c) row[static_cast<std::size_t>(c)] = window.at(t, c);
      sc.inputs[0].push_back(std::move(row));
    }
    for (int l = 0; l < num_layers; ++l) {
      std::vector<double> h_prev(static_cast<std::size_t>(h), 0.0);
      std::vector<double> c_prev(static_cast<std::size_t>(h), 0.0);
      for (int t = 0; t < window_length; ++t) {
        StepCache step = lstm_step(model.layers[static_cast<std::size_t>(l)],
                                   sc.inputs[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)],
                                   h_prev, c_prev);
        h_prev = step.h;
        c_prev = step.c;
        if (l + 1 < num_layers) {
          std::vector<double> next = step.h;
          if (apply_dropout) {
            std::vector<double> mask(static_cast<std::size_t>(h));
            for (int r = 0; r < h; ++r) {
              const bool keep = dropout_rng->uniform() >= dropout_rate;
              mask[static_cast<std::size_t>(r)] = keep ? keep_scale : 0.0;
              next[static_cast<std::size_t>(r)] *= mask[static_cast<std::size_t>(r)];
            }
            sc.dropout_masks[static_cast<std::size_t>(l)].push_back(std::move(mask));
          }
          sc.inputs[static_cast<std::size_t>(l + 1)].push_back(std::move(next));
        }
        sc.steps[static_cast<std::size_t>(l)].push_back(std::move(step));
      }
    }
    const std::vector<double>& top_h =
        sc.steps[static_cast<std::size_t>(num_layers - 1)].back().h;
    sc.logits = matvec(model.head_w, top_h);
    for (int c = 0; c < model.num_classes; ++c) {
      sc.logits[static_cast<std::size_t>(c)] += model.head_b[static_cast<std::size_t>(c)];
    }
    check_finite(sc.logits, "logits");
    sc.probs = softmax(sc.logits);
    out.samples.push_back(std::move(sc));
  }
  return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

double cross_entropy(const std::vector<double>& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.size())) {
    throw Error(Errc::BadLabel, "label " + std::to_string(label));
  }
  return -std::log(probs[static_cast<std::size_t>(label)] + kCrossEntropyEps);
}

double batch_loss(const ForwardResult& fwd, const std::vector<int>& labels) {
  if (labels.size() != fwd.samples.size()) {
    throw Error(Errc::LengthMismatch, "labels vs batch size");
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    sum += cross_entropy(fwd.samples[b].probs, labels[b]);
  }
  return sum / static_cast<double>(labels.size());
}

namespace {

ModelParams zeros_like(const ModelParams& model) {
  ModelParams g = model;
  for (LstmLayerParams& l : g.layers) {
    std::fill(l.w.data.begin(), l.w.data.end(), 0.0);
    std::fill(l.u.data.begin(), l.u.data.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  std::fill(g.head_w.data.begin(), g.head_w.data.end(), 0.0);
  std::fill(g.head_b.begin(), g.head_b.end(), 0.0);
  return g;
}

}  // namespace

ModelParams backward(const ModelParams& model, const ForwardResult& fwd,
                     const std::vector<int>& labels) {
  const int num_layers = static_cast<int>(model.layers.size());
  if (fwd.num_layers != num_layers || fwd.hidden != model.hidden() ||
      fwd.input_width != model.input_width() || fwd.num_classes != model.num_classes) {
    throw Error(Errc::StaleCache, "forward cache does not match this model");
  }
  if (labels.size() != fwd.samples.size()) {
    throw Error(Errc::LengthMismatch, "labels vs batch size");
  }
  const int h = fwd.hidden;
  const int window_length = fwd.window_length;
  ModelParams grads = zeros_like(model);

  for (std::size_t b = 0; b < fwd.samples.size(); ++b) {
    const SampleCache& sc = fwd.samples[b];
    const int label = labels[b];
    if (label < 0 || label >= model.num_classes) {
      throw Error(Errc::BadLabel, "label " + std::to_string(label));
    }
    // d(-ln(p_y + eps))/dlogits = p_y/(p_y + eps) * (p - onehot_y)
    const double p_y = sc.probs[static_cast<std::size_t>(label)];
    const double scale = p_y / (p_y + kCrossEntropyEps);
    std::vector<double> dlogits(sc.probs);
    dlogits[static_cast<std::size_t>(label)] -= 1.0;
    for (double& v : dlogits) v *= scale;

    const std::vector<double>& top_h =
        sc.steps[static_cast<std::size_t>(num_layers - 1)].back().h;
    add_outer(grads.head_w, dlogits, top_h);
    for (int c = 0; c < model.num_classes; ++c) {
      grads.head_b[static_cast<std::size_t>(c)] += dlogits[static_cast<std::size_t>(c)];
    }

    // dh injected into each layer from above, per timestep
    std::vector<std::vector<double>> dh_from_above(
        static_cast<std::size_t>(window_length),
        std::vector<double>(static_cast<std::size_t>(h), 0.0));
    dh_from_above.back() = matvec_transposed(model.head_w, dlogits);

    for (int l = num_layers - 1; l >= 0; --l) {
      const LstmLayerParams& layer = model.layers[static_cast<std::size_t>(l)];
      LstmLayerParams& layer_grads = grads.layers[static_cast<std::size_t>(l)];
      const auto& steps = sc.steps[static_cast<std::size_t>(l)];
      const auto& inputs = sc.inputs[static_cast<std::size_t>(l)];
      const bool has_mask = l > 0 && !sc.dropout_masks.empty() &&
                            !sc.dropout_masks[static_cast<std::size_t>(l - 1)].empty();

      std::vector<std::vector<double>> dx(static_cast<std::size_t>(window_length));
      std::vector<double> dh_rec(static_cast<std::size_t>(h), 0.0);
      std::vector<double> dc_carry(static_cast<std::size_t>(h), 0.0);
      std::vector<double> dz(static_cast<std::size_t>(4) * h);

      for (int t = window_length - 1; t >= 0; --t) {
        const StepCache& step = steps[static_cast<std::size_t>(t)];
        const std::vector<double>* c_prev =
            t > 0 ? &steps[static_cast<std::size_t>(t - 1)].c : nullptr;
        for (int r = 0; r < h; ++r) {
          const std::size_t k = static_cast<std::size_t>(r);
          const double dh = dh_from_above[static_cast<std::size_t>(t)][k] + dh_rec[k];
          const double d_o = dh * step.tanh_c[k];
          const double dc =
              dc_carry[k] + dh * step.o[k] * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
          const double di = dc * step.g[k];
          const double dg = dc * step.i[k];
          const double df = dc * (c_prev ? (*c_prev)[k] : 0.0);
          dc_carry[k] = dc * step.f[k];
          dz[k] = di * step.i[k] * (1.0 - step.i[k]);
          dz[static_cast<std::size_t>(h) + k] = df * step.f[k] * (1.0 - step.f[k]);
          dz[static_cast<std::size_t>(2 * h) + k] = dg * (1.0 - step.g[k] * step.g[k]);
          dz[static_cast<std::size_t>(3 * h) + k] = d_o * step.o[k] * (1.0 - step.o[k]);
        }
        add_outer(layer_grads.w, dz, inputs[static_cast<std::size_t>(t)]);
        if (t > 0) {
          add_outer(layer_grads.u, dz, steps[static_cast<std::size_t>(t - 1)].h);
        }
        for (std::size_t k = 0; k < dz.size(); ++k) layer_grads.b[k] += dz[k];
        dx[static_cast<std::size_t>(t)] = matvec_transposed(layer.w, dz);
        dh_rec = matvec_transposed(layer.u, dz);
      }

      if (l > 0) {
        // dx becomes dh for the layer below, through the dropout mask if any.
        for (int t = 0; t < window_length; ++t) {
          std::vector<double>& below = dh_from_above[static_cast<std::size_t>(t)];
          const std::vector<double>& dxt = dx[static_cast<std::size_t>(t)];
          if (has_mask) {
            const std::vector<double>& mask =
                sc.dropout_masks[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t)];
            for (int r = 0; r < h; ++r) {
              below[static_cast<std::size_t>(r)] =
                  dxt[static_cast<std::size_t>(r)] * mask[static_cast<std::size_t>(r)];
            }
          } else {
            below = dxt;
          }
        }
      }
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(fwd.samples.size());
  for (LstmLayerParams& l : grads.layers) {
    for (double& v : l.w.data) v *= inv_batch;
    for (double& v : l.u.data) v *= inv_batch;
    for (double& v : l.b) v *= inv_batch;
  }
  for (double& v : grads.head_w.data) v *= inv_batch;
  for (double& v : grads.head_b) v *= inv_batch;
  return grads;
}

namespace {

void for_each_tensor(ModelParams& p, const std::function<void(std::vector<double>&)>& fn) {
  for (LstmLayerParams& l : p.layers) {
    fn(l.w.data);
    fn(l.u.data);
    fn(l.b);
  }
  fn(p.head_w.data);
  fn(p.head_b);
}

}  // namespace

void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const OptimizerSpec& spec) {
  // Walk all tensors in lockstep.
  std::vector<std::vector<double>*> ps, gs, ms, vs;
  auto collect = [](ModelParams& p, std::vector<std::vector<double>*>& out) {
    for (LstmLayerParams& l : p.layers) {
      out.push_back(&l.w.data);
      out.push_back(&l.u.data);
      out.push_back(&l.b);
    }
    out.push_back(&p.head_w.data);
    out.push_back(&p.head_b);
  };
  collect(params, ps);
  collect(const_cast<ModelParams&>(grads), gs);
  collect(state.m, ms);
  collect(state.v, vs);
  if (ps.size() != gs.size() || ps.size() != ms.size()) {
    throw Error(Errc::ShapeMismatch, "optimizer tensor count mismatch");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->size() != gs[i]->size()) {
      throw Error(Errc::ShapeMismatch, "gradient shape does not mirror parameters");
    }
  }

  if (spec.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t k = 0; k < ps[i]->size(); ++k) {
        (*ps[i])[k] -= spec.learning_rate * (*gs[i])[k];
      }
    }
    return;
  }

  ++state.t;
  const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t k = 0; k < ps[i]->size(); ++k) {
      const double g = (*gs[i])[k];
      double& m = (*ms[i])[k];
      double& v = (*vs[i])[k];
      m = spec.beta1 * m + (1.0 - spec.beta1) * g;
      v = spec.beta2 * v + (1.0 - spec.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      (*ps[i])[k] -= spec.learning_rate * m_hat / (std::sqrt(v_hat) + spec.epsilon);
    }
  }
}

std::vector<double> train(ModelParams& model, const std::vector<Matrix>& windows,
                          const std::vector<int>& labels, const HyperParams& hp,
                          const ProgressSink& progress) {
  hp.validate();
  if (windows.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  if (windows.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, "windows vs labels");
  }
  const std::size_t n = windows.size();
  OptimizerState state = init_optimizer_state(model);
  Rng dropout_rng(mix_seed(hp.seed, 0xd120u));
  std::vector<double> epoch_losses;
  epoch_losses.reserve(static_cast<std::size_t>(hp.epochs));

  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(hp.seed, 0xa5a5u + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(hp.batch_size));
      std::vector<Matrix> batch;
      std::vector<int> batch_labels;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(windows[order[k]]);
        batch_labels.push_back(labels[order[k]]);
      }
      ForwardResult fwd = forward(model, batch, true, hp.dropout_rate, &dropout_rng);
      loss_sum += batch_loss(fwd, batch_labels) * static_cast<double>(batch.size());
      ModelParams grads = backward(model, fwd, batch_labels);
      optimizer_step(model, grads, state, hp.optimizer);
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    epoch_losses.push_back(mean_loss);
    if (progress) progress(epoch, mean_loss);
  }
  return epoch_losses;
}

Prediction predict(const ModelParams& model, const Matrix& window) {
  ForwardResult fwd = forward(model, {window}, false, 0.0, nullptr);
  Prediction p;
  p.probs = fwd.samples.front().probs;
  p.label = 0;
  for (std::size_t c = 1; c < p.probs.size(); ++c) {
    if (p.probs[c] > p.probs[static_cast<std::size_t>(p.label)]) {
      p.label = static_cast<int>(c);
    }
  }
  return p;
}

std::string save_model(const ModelParams& model, const HyperParams& hp) {
  nlohmann::json j;
  j["hyperparams"] = hp;
  j["num_classes"] = model.num_classes;
  j["shapes"] = {{"input_width", model.input_width()},
                 {"hidden", model.hidden()},
                 {"num_layers", model.layers.size()}};
  nlohmann::json layers = nlohmann::json::array();
  for (const LstmLayerParams& l : model.layers) {
    layers.push_back({{"w", l.w.data}, {"u", l.u.data}, {"b", l.b}});
  }
  j["layers"] = layers;
  j["head"] = {{"w", model.head_w.data}, {"b", model.head_b}};

  std::string out = "TPCM";
  out.push_back(static_cast<char>(kModelVersion & 0xff));
  out.push_back(static_cast<char>((kModelVersion >> 8) & 0xff));
  out += j.dump();
  return out;
}

std::pair<ModelParams, HyperParams> load_model(const std::string& bytes) {
  if (bytes.size() < 6 || bytes.compare(0, 4, "TPCM") != 0) {
    throw Error(Errc::BadMagic, "not a TPCM model file");
  }
  const std::uint16_t version = static_cast<std::uint8_t>(bytes[4]) |
                                (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes[5]))
                                 << 8);
  if (version != kModelVersion) {
    throw Error(Errc::VersionMismatch, "model version " + std::to_string(version));
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(6));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, e.what());
  }
  try {
    HyperParams hp = j.at("hyperparams").get<HyperParams>();
    ModelParams model;
    model.num_classes = j.at("num_classes").get<int>();
    const int input_width = j.at("shapes").at("input_width").get<int>();
    const int hidden = j.at("shapes").at("hidden").get<int>();
    const std::size_t num_layers = j.at("shapes").at("num_layers").get<std::size_t>();
    const auto& layers = j.at("layers");
    if (layers.size() != num_layers) {
      throw Error(Errc::CorruptPayload, "layer count mismatch");
    }
    for (std::size_t l = 0; l < num_layers; ++l) {
      LstmLayerParams layer;
      const int fan_in = l == 0 ? input_width : hidden;
      layer.w = Matrix(4 * hidden, fan_in);
      layer.u = Matrix(4 * hidden, hidden);
      layer.w.data = layers.at(l).at("w").get<std::vector<double>>();
      layer.u.data = layers.at(l).at("u").get<std::vector<double>>();
      layer.b = layers.at(l).at("b").get<std::vector<double>>();
      if (layer.w.data.size() != static_cast<std::size_t>(4 * hidden) * fan_in ||
          layer.u.data.size() != static_cast<std::size_t>(4 * hidden) * hidden ||
          layer.b.size() != static_cast<std::size_t>(4) * hidden) {
        throw Error(Errc::CorruptPayload, "layer tensor sizes");
      }
      model.layers.push_back(std::move(layer));
    }
    model.head_w = Matrix(model.num_classes, hidden);
    model.head_w.data = j.at("head").at("w").get<std::vector<double>>();
    model.head_b = j.at("head").at("b").get<std::vector<double>>();
    if (model.head_w.data.size() !=
            static_cast<std::size_t>(model.num_classes) * hidden ||
        model.head_b.size() != static_cast<std::size_t>(model.num_classes)) {
      throw Error(Errc::CorruptPayload, "head tensor sizes");
    }
    return {std::move(model), hp};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, e.what());
  }
}

}  // namespace tpc::neural
