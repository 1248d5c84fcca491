#include "mmn/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "mmn/binio.hpp"
#include "mmn/error.hpp"
#include "mmn/threading.hpp"

namespace mmn {

void NetworkLayout::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw InvalidArgument("layout: input/output dims must be >= 1");
  for (auto h : hidden_dims)
    if (h < 1) throw InvalidArgument("layout: hidden dims must be >= 1");
}

std::int64_t NetworkParams::param_count() const {
  std::int64_t n = 0;
  for (const auto& l : layers)
    n += l.w.size() + static_cast<std::int64_t>(l.b.size());
  return n;
}

bool NetworkParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.w.all_finite()) return false;
    for (double b : l.b)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

NetworkParams init_network(const NetworkLayout& layout, Rng& rng,
                           InitScheme scheme) {
  layout.validate();
  NetworkParams p;
  p.layout = layout;
  std::int64_t fan_in = layout.input_dim;
  auto make_layer = [&](std::int64_t out) {
    Layer l;
    l.w = Matrix(out, fan_in);
    if (scheme == InitScheme::kHeUniform) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (std::int64_t i = 0; i < l.w.size(); ++i)
        l.w.data()[i] = (2.0 * rng.next_unit() - 1.0) * limit;
    }
    l.b.assign(static_cast<std::size_t>(out), 0.0);
    p.layers.push_back(std::move(l));
    fan_in = out;
  };
  for (auto h : layout.hidden_dims) make_layer(h);
  make_layer(layout.output_dim);
  return p;
}

namespace {

Matrix affine(const Matrix& x, const Layer& l) {
  Matrix out = matmul_nt(x, l.w);
  for (std::int64_t t = 0; t < out.rows(); ++t) {
    auto r = out.row(t);
    for (std::int64_t j = 0; j < out.cols(); ++j) r[j] += l.b[j];
  }
  return out;
}

Matrix relu(const Matrix& pre) {
  Matrix out = pre;
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  return out;
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> s(static_cast<std::size_t>(m.cols()), 0.0);
  for (std::int64_t t = 0; t < m.rows(); ++t) {
    const auto r = m.row(t);
    for (std::int64_t j = 0; j < m.cols(); ++j) s[j] += r[j];
  }
  return s;
}

}  // namespace

FrameSequence forward(const NetworkParams& p, const FrameSequence& x,
                      ForwardCache* cache) {
  if (x.cols() != p.layout.input_dim)
    throw DimensionMismatch("forward: input dim differs from layout");
  const auto n_hidden = static_cast<std::int64_t>(p.layout.hidden_dims.size());
  if (cache) {
    cache->acts.clear();
    cache->preacts.clear();
    cache->acts.push_back(x);
  }
  Matrix cur = x;
  for (std::int64_t i = 0; i < n_hidden; ++i) {
    Matrix pre = affine(cur, p.layers[static_cast<std::size_t>(i)]);
    cur = relu(pre);
    if (cache) {
      cache->preacts.push_back(std::move(pre));
      cache->acts.push_back(cur);
    }
  }
  return affine(cur, p.layers.back());
}

double ParamGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& m : dw)
    for (std::int64_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  for (const auto& v : db)
    for (double b : v) s += b * b;
  return s;
}

ParamGrads backward(const NetworkParams& p, const ForwardCache& cache,
                    const Matrix& dy, Matrix* dx) {
  const auto n_layers = static_cast<std::int64_t>(p.layers.size());
  const auto n_hidden = n_layers - 1;
  if (cache.acts.size() != static_cast<std::size_t>(n_hidden) + 1)
    throw InvalidArgument("backward: cache does not match network depth");
  if (dy.rows() != cache.acts[0].rows() ||
      dy.cols() != p.layout.output_dim)
    throw DimensionMismatch("backward: dy shape differs from forward output");

  ParamGrads g;
  g.dw.resize(static_cast<std::size_t>(n_layers));
  g.db.resize(static_cast<std::size_t>(n_layers));

  Matrix dcur = dy;
  for (std::int64_t i = n_layers - 1; i >= 0; --i) {
    const auto& layer = p.layers[static_cast<std::size_t>(i)];
    const Matrix& input = cache.acts[static_cast<std::size_t>(i)];
    g.dw[static_cast<std::size_t>(i)] = matmul_tn(dcur, input);
    g.db[static_cast<std::size_t>(i)] = column_sums(dcur);
    const bool need_input_grad = (i > 0) || (dx != nullptr);
    if (!need_input_grad) break;
    Matrix dprev = matmul(dcur, layer.w);
    if (i > 0) {
      // ReLU mask: subgradient 0 at exactly-zero pre-activations.
      const Matrix& pre = cache.preacts[static_cast<std::size_t>(i - 1)];
      for (std::int64_t k = 0; k < dprev.size(); ++k)
        if (!(pre.data()[k] > 0.0)) dprev.data()[k] = 0.0;
    }
    dcur = std::move(dprev);
  }
  if (dx) *dx = std::move(dcur);
  return g;
}

AdamState AdamState::init(const NetworkParams& p, const AdamConfig& cfg) {
  AdamState s;
  s.cfg = cfg;
  for (const auto& l : p.layers) {
    s.mw.emplace_back(l.w.rows(), l.w.cols());
    s.vw.emplace_back(l.w.rows(), l.w.cols());
    s.mb.emplace_back(l.b.size(), 0.0);
    s.vb.emplace_back(l.b.size(), 0.0);
  }
  return s;
}

void adam_step(NetworkParams& p, const ParamGrads& g, AdamState& s) {
  if (g.dw.size() != p.layers.size() || s.mw.size() != p.layers.size())
    throw DimensionMismatch("adam_step: gradient/state layer count differs");
  s.step += 1;
  const double b1 = s.cfg.beta1, b2 = s.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
  auto update = [&](double& param, double grad, double& m, double& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param -= s.cfg.lr * mhat / (std::sqrt(vhat) + s.cfg.eps);
  };
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    if (g.dw[i].rows() != l.w.rows() || g.dw[i].cols() != l.w.cols() ||
        g.db[i].size() != l.b.size())
      throw DimensionMismatch("adam_step: gradient shapes differ");
    for (std::int64_t k = 0; k < l.w.size(); ++k)
      update(l.w.data()[k], g.dw[i].data()[k], s.mw[i].data()[k],
             s.vw[i].data()[k]);
    for (std::size_t k = 0; k < l.b.size(); ++k)
      update(l.b[k], g.db[i][k], s.mb[i][k], s.vb[i][k]);
  }
}

FrameSequence hidden_activations(const NetworkParams& p,
                                 const FrameSequence& x,
                                 std::int64_t layer_index) {
  const auto n_hidden = static_cast<std::int64_t>(p.layout.hidden_dims.size());
  if (layer_index < 1 || layer_index > n_hidden)
    throw LayerOutOfRange("hidden_activations: layer " +
                          std::to_string(layer_index) + " of " +
                          std::to_string(n_hidden));
  ForwardCache cache;
  (void)forward(p, x, &cache);
  return cache.acts[static_cast<std::size_t>(layer_index)];
}

namespace {

constexpr char kMagic[4] = {'M', 'M', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_matrix(std::ostream& os, const Matrix& m) {
  for (std::int64_t i = 0; i < m.size(); ++i)
    binio::write_f64(os, m.data()[i]);
}

void read_matrix(std::istream& is, Matrix& m, const char* what) {
  for (std::int64_t i = 0; i < m.size(); ++i)
    m.data()[i] = binio::read_f64(is, what);
}

}  // namespace

void save_checkpoint(const NetworkParams& p, const AdamState* opt,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  binio::write_u32(os, kVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(p.layout.input_dim));
  binio::write_u32(os,
                   static_cast<std::uint32_t>(p.layout.hidden_dims.size()));
  for (auto h : p.layout.hidden_dims)
    binio::write_u32(os, static_cast<std::uint32_t>(h));
  binio::write_u32(os, static_cast<std::uint32_t>(p.layout.output_dim));
  for (const auto& l : p.layers) {
    write_matrix(os, l.w);
    for (double b : l.b) binio::write_f64(os, b);
  }
  binio::write_u8(os, opt ? 1 : 0);
  if (opt) {
    binio::write_u64(os, static_cast<std::uint64_t>(opt->step));
    binio::write_f64(os, opt->cfg.lr);
    binio::write_f64(os, opt->cfg.beta1);
    binio::write_f64(os, opt->cfg.beta2);
    binio::write_f64(os, opt->cfg.eps);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      write_matrix(os, opt->mw[i]);
      for (double b : opt->mb[i]) binio::write_f64(os, b);
      write_matrix(os, opt->vw[i]);
      for (double b : opt->vb[i]) binio::write_f64(os, b);
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint magic mismatch: " + path);
  const auto version = binio::read_u32(is, "checkpoint version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  NetworkLayout layout;
  layout.input_dim = binio::read_u32(is, "checkpoint layout");
  const auto n_hidden = binio::read_u32(is, "checkpoint layout");
  if (n_hidden > 64) throw FormatError("implausible hidden layer count");
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    layout.hidden_dims.push_back(binio::read_u32(is, "checkpoint layout"));
  layout.output_dim = binio::read_u32(is, "checkpoint layout");
  layout.validate();

  Checkpoint ck;
  ck.params.layout = layout;
  std::int64_t fan_in = layout.input_dim;
  auto dims = layout.hidden_dims;
  dims.push_back(layout.output_dim);
  for (auto out : dims) {
    Layer l;
    l.w = Matrix(out, fan_in);
    read_matrix(is, l.w, "checkpoint weights");
    l.b.assign(static_cast<std::size_t>(out), 0.0);
    for (auto& b : l.b) b = binio::read_f64(is, "checkpoint bias");
    ck.params.layers.push_back(std::move(l));
    fan_in = out;
  }
  if (!ck.params.all_finite())
    throw FormatError("checkpoint contains non-finite parameters");
  const auto has_opt = binio::read_u8(is, "checkpoint optimizer flag");
  if (has_opt == 1) {
    AdamState s;
    s.step = static_cast<std::int64_t>(binio::read_u64(is, "adam step"));
    s.cfg.lr = binio::read_f64(is, "adam config");
    s.cfg.beta1 = binio::read_f64(is, "adam config");
    s.cfg.beta2 = binio::read_f64(is, "adam config");
    s.cfg.eps = binio::read_f64(is, "adam config");
    for (const auto& l : ck.params.layers) {
      Matrix mw(l.w.rows(), l.w.cols()), vw(l.w.rows(), l.w.cols());
      std::vector<double> mb(l.b.size()), vb(l.b.size());
      read_matrix(is, mw, "adam first moment");
      for (auto& b : mb) b = binio::read_f64(is, "adam first moment");
      read_matrix(is, vw, "adam second moment");
      for (auto& b : vb) b = binio::read_f64(is, "adam second moment");
      s.mw.push_back(std::move(mw));
      s.mb.push_back(std::move(mb));
      s.vw.push_back(std::move(vw));
      s.vb.push_back(std::move(vb));
    }
    ck.opt = std::move(s);
  } else if (has_opt != 0) {
    throw FormatError("bad optimizer presence flag");
  }
  return ck;
}

}  // namespace mmn
