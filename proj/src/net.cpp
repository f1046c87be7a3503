#include "scaledet/net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "scaledet/rng.hpp"
#include "scaledet/threadpool.hpp"

namespace scaledet {

namespace {

using nlohmann::json;

std::vector<std::string> split_tokens(const std::string& arch) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : arch) {
    if (c == '-') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int parse_count(const std::string& token, std::size_t prefix_len) {
  const std::string digits = token.substr(prefix_len);
  if (digits.empty()) throw std::invalid_argument("architecture token missing size: " + token);
  int v = 0;
  for (char c : digits) {
    if (c < '0' || c > '9')
      throw std::invalid_argument("architecture token not understood: " + token);
    v = v * 10 + (c - '0');
    if (v > 1 << 20) throw std::invalid_argument("architecture size out of range: " + token);
  }
  if (v < 1) throw std::invalid_argument("architecture size must be positive: " + token);
  return v;
}

// He-style uniform initialization: bound sqrt(6 / fan_in), biases zero.
void init_params(std::vector<double>& w, std::vector<double>& b, int fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / fan_in);
  for (double& v : w) v = rng.uniform(-bound, bound);
  for (double& v : b) v = 0.0;
}

}  // namespace

MlpConvNet::MlpConvNet(const std::string& arch, Shape3 input, int class_count,
                       std::uint64_t seed)
    : arch_(arch), input_(input), class_count_(class_count), seed_(seed) {
  if (input.c < 1 || input.h < 1 || input.w < 1)
    throw std::invalid_argument("network input shape must be positive");
  if (class_count < 2) throw std::invalid_argument("network needs at least 2 classes");

  Rng rng(derive_seed(seed, "net-init"));
  Shape3 cur = input;
  bool flattened = false;

  auto add_conv = [&](int filters) {
    if (flattened)
      throw std::invalid_argument("architecture places a conv stage after a dense stage");
    ConvLayer conv;
    conv.in_ch = cur.c;
    conv.out_ch = filters;
    conv.k = 3;
    if (cur.h < conv.k || cur.w < conv.k) {
      std::ostringstream os;
      os << "conv stage needs at least " << conv.k << "x" << conv.k
         << " input but the running shape is " << cur.h << "x" << cur.w;
      throw std::invalid_argument(os.str());
    }
    conv.w.resize(static_cast<std::size_t>(filters) * conv.in_ch * conv.k * conv.k);
    conv.b.resize(filters);
    init_params(conv.w, conv.b, conv.in_ch * conv.k * conv.k, rng);
    cur = Shape3{filters, cur.h - conv.k + 1, cur.w - conv.k + 1};
    layers_.emplace_back(std::move(conv));
    out_shapes_.push_back(cur);
    layers_.emplace_back(ReluLayer{});
    out_shapes_.push_back(cur);
  };

  auto add_pool = [&] {
    if (flattened)
      throw std::invalid_argument("architecture places a pool stage after a dense stage");
    if (cur.h < 2 || cur.w < 2)
      throw std::invalid_argument("pool stage needs at least a 2x2 running shape");
    cur = Shape3{cur.c, cur.h / 2, cur.w / 2};
    layers_.emplace_back(PoolLayer{});
    out_shapes_.push_back(cur);
  };

  auto add_dense = [&](int units, bool relu) {
    flattened = true;
    DenseLayer dense;
    dense.in_dim = static_cast<int>(cur.count());
    dense.out_dim = units;
    dense.w.resize(static_cast<std::size_t>(units) * dense.in_dim);
    dense.b.resize(units);
    init_params(dense.w, dense.b, dense.in_dim, rng);
    cur = Shape3{1, 1, units};
    layers_.emplace_back(std::move(dense));
    out_shapes_.push_back(cur);
    if (relu) {
      layers_.emplace_back(ReluLayer{});
      out_shapes_.push_back(cur);
    }
  };

  for (const std::string& token : split_tokens(arch)) {
    if (token.rfind("conv", 0) == 0)
      add_conv(parse_count(token, 4));
    else if (token == "pool")
      add_pool();
    else if (token.rfind("dense", 0) == 0)
      add_dense(parse_count(token, 5), true);
    else
      throw std::invalid_argument("architecture token not understood: " + token);
  }
  add_dense(class_count, false);  // logits head
}

void MlpConvNet::check_input(const Image& x) const {
  if (x.channels != input_.c || x.height != input_.h || x.width != input_.w)
    throw std::invalid_argument("image shape does not match the network input shape");
}

double MlpConvNet::forward(const Image& x, int label, Tape& tape) const {
  check_input(x);
  tape.acts.assign(layers_.size() + 1, {});
  tape.pool_argmax.clear();
  tape.acts[0] = x.pixels;

  Shape3 cur = input_;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const std::vector<double>& in = tape.acts[li];
    std::vector<double>& out = tape.acts[li + 1];

    if (const ConvLayer* conv = std::get_if<ConvLayer>(&layers_[li])) {
      int oh = cur.h - conv->k + 1, ow = cur.w - conv->k + 1;
      out.assign(static_cast<std::size_t>(conv->out_ch) * oh * ow, 0.0);
      for (int o = 0; o < conv->out_ch; ++o) {
        double* op = out.data() + static_cast<std::size_t>(o) * oh * ow;
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) op[y * ow + xx] = conv->b[o];
        for (int i = 0; i < conv->in_ch; ++i) {
          const double* ip = in.data() + static_cast<std::size_t>(i) * cur.h * cur.w;
          const double* wp = conv->w.data() +
                             (static_cast<std::size_t>(o) * conv->in_ch + i) * conv->k * conv->k;
          for (int ky = 0; ky < conv->k; ++ky)
            for (int kx = 0; kx < conv->k; ++kx) {
              double wv = wp[ky * conv->k + kx];
              for (int y = 0; y < oh; ++y) {
                const double* row = ip + (y + ky) * cur.w + kx;
                double* orow = op + y * ow;
                for (int xx = 0; xx < ow; ++xx) orow[xx] += wv * row[xx];
              }
            }
        }
      }
      cur = out_shapes_[li];
    } else if (std::holds_alternative<ReluLayer>(layers_[li])) {
      out.resize(in.size());
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    } else if (std::holds_alternative<PoolLayer>(layers_[li])) {
      int oh = cur.h / 2, ow = cur.w / 2;
      out.assign(static_cast<std::size_t>(cur.c) * oh * ow, 0.0);
      std::vector<int> arg(out.size(), 0);
      for (int c = 0; c < cur.c; ++c) {
        const double* ip = in.data() + static_cast<std::size_t>(c) * cur.h * cur.w;
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) {
            int base = (2 * y) * cur.w + 2 * xx;
            int cand[4] = {base, base + 1, base + cur.w, base + cur.w + 1};
            int best = cand[0];
            for (int j = 1; j < 4; ++j)
              if (ip[cand[j]] > ip[best]) best = cand[j];
            std::size_t oidx = (static_cast<std::size_t>(c) * oh + y) * ow + xx;
            out[oidx] = ip[best];
            arg[oidx] = static_cast<int>(c * cur.h * cur.w + best);
          }
      }
      tape.pool_argmax.push_back(std::move(arg));
      cur = out_shapes_[li];
    } else {
      const DenseLayer& dense = std::get<DenseLayer>(layers_[li]);
      out.assign(dense.out_dim, 0.0);
      for (int o = 0; o < dense.out_dim; ++o) {
        const double* wp = dense.w.data() + static_cast<std::size_t>(o) * dense.in_dim;
        double acc = dense.b[o];
        for (int i = 0; i < dense.in_dim; ++i) acc += wp[i] * in[i];
        out[o] = acc;
      }
      cur = out_shapes_[li];
    }
  }

  if (label < 0) return 0.0;
  const std::vector<double>& lg = tape.acts.back();
  std::vector<double> p = softmax(lg);
  double lp = p[label];
  // A saturated softmax can round the true class to exactly zero while the
  // logits are still finite; floor that case so the log stays finite. A NaN
  // probability (overflowed parameters) must pass through untouched so the
  // caller's divergence guard can see it.
  if (lp == 0.0) lp = 1e-300;
  return -std::log(lp);
}

void MlpConvNet::backward(const Tape& tape, int label, double weight,
                          Gradients& grads) const {
  if (label < 0 || label >= class_count_)
    throw std::invalid_argument("backward label outside the class range");

  std::vector<double> grad = softmax(tape.acts.back());
  grad[label] -= 1.0;
  for (double& g : grad) g *= weight;

  int pool_i = static_cast<int>(tape.pool_argmax.size());
  Shape3 cur;
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const std::vector<double>& in = tape.acts[li];
    cur = li == 0 ? input_ : out_shapes_[li - 1];
    std::vector<double> din;

    if (const ConvLayer* conv = std::get_if<ConvLayer>(&layers_[li])) {
      int oh = cur.h - conv->k + 1, ow = cur.w - conv->k + 1;
      din.assign(in.size(), 0.0);
      std::vector<double>& gw = grads.w[li];
      std::vector<double>& gb = grads.b[li];
      for (int o = 0; o < conv->out_ch; ++o) {
        const double* gp = grad.data() + static_cast<std::size_t>(o) * oh * ow;
        // Sum into a local first so each backward() call contributes one
        // rounded addend per parameter; repeated accumulation of the same
        // sample then doubles the gradient exactly.
        double gbo = 0.0;
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) gbo += gp[y * ow + xx];
        gb[o] += gbo;
        for (int i = 0; i < conv->in_ch; ++i) {
          const double* ip = in.data() + static_cast<std::size_t>(i) * cur.h * cur.w;
          double* dip = din.data() + static_cast<std::size_t>(i) * cur.h * cur.w;
          std::size_t woff =
              (static_cast<std::size_t>(o) * conv->in_ch + i) * conv->k * conv->k;
          for (int ky = 0; ky < conv->k; ++ky)
            for (int kx = 0; kx < conv->k; ++kx) {
              double wv = conv->w[woff + ky * conv->k + kx];
              double acc = 0.0;
              for (int y = 0; y < oh; ++y) {
                const double* row = ip + (y + ky) * cur.w + kx;
                double* drow = dip + (y + ky) * cur.w + kx;
                const double* grow = gp + y * ow;
                for (int xx = 0; xx < ow; ++xx) {
                  acc += grow[xx] * row[xx];
                  drow[xx] += grow[xx] * wv;
                }
              }
              gw[woff + ky * conv->k + kx] += acc;
            }
        }
      }
    } else if (std::holds_alternative<ReluLayer>(layers_[li])) {
      din.resize(in.size());
      for (std::size_t i = 0; i < in.size(); ++i)
        din[i] = in[i] > 0.0 ? grad[i] : 0.0;
    } else if (std::holds_alternative<PoolLayer>(layers_[li])) {
      --pool_i;
      const std::vector<int>& arg = tape.pool_argmax[pool_i];
      din.assign(in.size(), 0.0);
      for (std::size_t i = 0; i < grad.size(); ++i) din[arg[i]] += grad[i];
    } else {
      const DenseLayer& dense = std::get<DenseLayer>(layers_[li]);
      din.assign(dense.in_dim, 0.0);
      std::vector<double>& gw = grads.w[li];
      std::vector<double>& gb = grads.b[li];
      for (int o = 0; o < dense.out_dim; ++o) {
        double go = grad[o];
        gb[o] += go;
        double* gwp = gw.data() + static_cast<std::size_t>(o) * dense.in_dim;
        const double* wp = dense.w.data() + static_cast<std::size_t>(o) * dense.in_dim;
        for (int i = 0; i < dense.in_dim; ++i) {
          gwp[i] += go * in[i];
          din[i] += go * wp[i];
        }
      }
    }
    grad = std::move(din);
  }
}

Gradients MlpConvNet::zero_gradients() const {
  Gradients g;
  g.w.resize(layers_.size());
  g.b.resize(layers_.size());
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    if (const ConvLayer* conv = std::get_if<ConvLayer>(&layers_[li])) {
      g.w[li].assign(conv->w.size(), 0.0);
      g.b[li].assign(conv->b.size(), 0.0);
    } else if (const DenseLayer* dense = std::get_if<DenseLayer>(&layers_[li])) {
      g.w[li].assign(dense->w.size(), 0.0);
      g.b[li].assign(dense->b.size(), 0.0);
    }
  }
  return g;
}

std::vector<std::span<double>> MlpConvNet::param_views() {
  std::vector<std::span<double>> out;
  for (Layer& layer : layers_) {
    if (ConvLayer* conv = std::get_if<ConvLayer>(&layer)) {
      out.emplace_back(conv->w);
      out.emplace_back(conv->b);
    } else if (DenseLayer* dense = std::get_if<DenseLayer>(&layer)) {
      out.emplace_back(dense->w);
      out.emplace_back(dense->b);
    }
  }
  return out;
}

std::vector<std::span<const double>> MlpConvNet::param_views() const {
  std::vector<std::span<const double>> out;
  for (const Layer& layer : layers_) {
    if (const ConvLayer* conv = std::get_if<ConvLayer>(&layer)) {
      out.emplace_back(conv->w);
      out.emplace_back(conv->b);
    } else if (const DenseLayer* dense = std::get_if<DenseLayer>(&layer)) {
      out.emplace_back(dense->w);
      out.emplace_back(dense->b);
    }
  }
  return out;
}

std::size_t MlpConvNet::param_count() const {
  std::size_t n = 0;
  for (std::span<const double> s : param_views()) n += s.size();
  return n;
}

std::vector<double> MlpConvNet::logits(const Image& x) const {
  thread_local Tape tape;
  forward(x, -1, tape);
  return tape.acts.back();
}

std::vector<double> MlpConvNet::predict_probs(const Image& x) const {
  return softmax(logits(x));
}

int MlpConvNet::predict_label(const Image& x) const {
  std::vector<double> lg = logits(x);
  return argmax_lowest(lg);
}

std::vector<int> MlpConvNet::predict_labels(std::span<const Image> xs) const {
  std::vector<int> out(xs.size(), 0);
  inference_pool().parallel_for(xs.size(),
                                [&](std::size_t i) { out[i] = predict_label(xs[i]); });
  return out;
}

std::string MlpConvNet::to_checkpoint_json() const {
  json doc;
  doc["format_version"] = 1;
  doc["arch"] = arch_;
  doc["input_shape"] = {input_.c, input_.h, input_.w};
  doc["class_count"] = class_count_;
  doc["training_seed"] = seed_;
  json layers = json::array();
  for (const Layer& layer : layers_) {
    json l;
    if (const ConvLayer* conv = std::get_if<ConvLayer>(&layer)) {
      l["type"] = "conv";
      l["in_ch"] = conv->in_ch;
      l["out_ch"] = conv->out_ch;
      l["k"] = conv->k;
      l["w"] = conv->w;
      l["b"] = conv->b;
    } else if (const DenseLayer* dense = std::get_if<DenseLayer>(&layer)) {
      l["type"] = "dense";
      l["in_dim"] = dense->in_dim;
      l["out_dim"] = dense->out_dim;
      l["w"] = dense->w;
      l["b"] = dense->b;
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      l["type"] = "relu";
    } else {
      l["type"] = "pool";
    }
    layers.push_back(std::move(l));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(1);
}

MlpConvNet MlpConvNet::from_checkpoint_json(const std::string& text) {
  json doc = json::parse(text);
  if (doc.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format_version");
  Shape3 input{doc.at("input_shape").at(0).get<int>(),
               doc.at("input_shape").at(1).get<int>(),
               doc.at("input_shape").at(2).get<int>()};
  MlpConvNet net(doc.at("arch").get<std::string>(), input,
                 doc.at("class_count").get<int>(),
                 doc.at("training_seed").get<std::uint64_t>());
  const json& layers = doc.at("layers");
  if (layers.size() != net.layers_.size())
    throw std::runtime_error("checkpoint layer count does not match its architecture string");
  for (std::size_t li = 0; li < net.layers_.size(); ++li) {
    const json& l = layers.at(li);
    const std::string type = l.at("type").get<std::string>();
    if (ConvLayer* conv = std::get_if<ConvLayer>(&net.layers_[li])) {
      if (type != "conv") throw std::runtime_error("checkpoint layer type mismatch");
      std::vector<double> w = l.at("w").get<std::vector<double>>();
      std::vector<double> b = l.at("b").get<std::vector<double>>();
      if (w.size() != conv->w.size() || b.size() != conv->b.size())
        throw std::runtime_error("checkpoint conv parameter size mismatch");
      conv->w = std::move(w);
      conv->b = std::move(b);
    } else if (DenseLayer* dense = std::get_if<DenseLayer>(&net.layers_[li])) {
      if (type != "dense") throw std::runtime_error("checkpoint layer type mismatch");
      std::vector<double> w = l.at("w").get<std::vector<double>>();
      std::vector<double> b = l.at("b").get<std::vector<double>>();
      if (w.size() != dense->w.size() || b.size() != dense->b.size())
        throw std::runtime_error("checkpoint dense parameter size mismatch");
      dense->w = std::move(w);
      dense->b = std::move(b);
    } else if (std::holds_alternative<ReluLayer>(net.layers_[li])) {
      if (type != "relu") throw std::runtime_error("checkpoint layer type mismatch");
    } else if (type != "pool") {
      throw std::runtime_error("checkpoint layer type mismatch");
    }
  }
  return net;
}

void MlpConvNet::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << to_checkpoint_json() << "\n";
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

MlpConvNet MlpConvNet::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open checkpoint");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_checkpoint_json(buf.str());
}

}  // namespace scaledet
