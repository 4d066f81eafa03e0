#include "inex/toy_mllm.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "inex/errors.hpp"
#include "inex/rng.hpp"

namespace inex {

namespace {

constexpr char kMagic[8] = {'T', 'O', 'Y', 'M', 'L', 'L', 'M', '1'};
constexpr double kVisualScale = 2.0;
constexpr double kAttrMix = 0.3;

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = sigma * rng.next_gaussian();
  return m;
}

Vec gaussian_vec(std::size_t n, double sigma, Rng& rng) {
  Vec v(n);
  for (double& x : v) x = sigma * rng.next_gaussian();
  return v;
}

std::string token_name(const Vocab& vocab, int id) {
  switch (id) {
    case Vocab::kBos: return "<bos>";
    case Vocab::kEos: return "<eos>";
    case Vocab::kYes: return "<yes>";
    case Vocab::kNo: return "<no>";
    case Vocab::kQueryExists: return "<q-exists>";
    case Vocab::kQueryDescribe: return "<q-describe>";
    case Vocab::kSep: return "<sep>";
    case Vocab::kFeedback: return "<feedback>";
    default: break;
  }
  if (vocab.is_category(id)) return vocab.category_name(id);
  if (vocab.is_color(id)) return vocab.color_name(id);
  if (vocab.is_action(id)) return vocab.action_name(id);
  return "<unk" + std::to_string(id) + ">";
}

Vec relu(Vec v) {
  for (double& x : v) {
    if (x < 0.0) x = 0.0;
  }
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_layers < 1 || num_heads < 1 || model_dim < 1 || vocab_size < 1 ||
      max_visual_tokens < 1) {
    throw std::invalid_argument("ModelConfig: all dimensions must be >= 1");
  }
  if (model_dim % num_heads != 0) {
    throw std::invalid_argument("ModelConfig: model_dim must be divisible by num_heads");
  }
  if (static_cast<std::size_t>(vocab.size()) > vocab_size) {
    throw std::invalid_argument("ModelConfig: symbol table exceeds vocab_size");
  }
}

ModelWeights build_model(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.model_dim;
  const double sigma = 1.0 / std::sqrt(static_cast<double>(d));

  ModelWeights w;
  w.config = config;

  // Token embeddings are seeded hash embeddings of the symbol names, so the
  // same symbol always maps to the same vector for a given model seed.
  w.embedding = Matrix(config.vocab_size, d);
  for (std::size_t tok = 0; tok < config.vocab_size; ++tok) {
    Rng rng(mix_seed(config.seed, hash_symbol(token_name(config.vocab, static_cast<int>(tok)))));
    for (std::size_t j = 0; j < d; ++j) {
      w.embedding.at(tok, j) = sigma * rng.next_gaussian();
    }
  }

  Rng rng(mix_seed(config.seed, 0x1001));
  w.layers.resize(config.num_layers);
  for (auto& layer : w.layers) {
    layer.wq = gaussian_matrix(d, d, sigma, rng);
    layer.wk = gaussian_matrix(d, d, sigma, rng);
    layer.wv = gaussian_matrix(d, d, sigma, rng);
    layer.wo = gaussian_matrix(d, d, sigma, rng);
    layer.w1 = gaussian_matrix(d, config.ffn_dim(), sigma, rng);
    layer.b1 = gaussian_vec(config.ffn_dim(), 0.01, rng);
    layer.w2 = gaussian_matrix(config.ffn_dim(), d, sigma, rng);
    layer.b2 = gaussian_vec(d, 0.01, rng);
  }

  // Tied output head: logits score the hidden state against token embeddings.
  w.w_out = Matrix(d, config.vocab_size);
  for (std::size_t tok = 0; tok < config.vocab_size; ++tok) {
    for (std::size_t j = 0; j < d; ++j) {
      w.w_out.at(j, tok) = w.embedding.at(tok, j);
    }
  }
  w.out_bias = Vec(config.vocab_size, 0.0);

  // Near-identity alignment keeps visual tokens close to the category
  // embedding they encode.
  w.visual_align = gaussian_matrix(d, d, 0.05 * sigma, rng);
  for (std::size_t j = 0; j < d; ++j) w.visual_align.at(j, j) += 1.0;

  return w;
}

std::uint64_t ModelWeights::checksum() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], sizeof bits);
      h ^= bits;
      h *= 1099511628211ULL;
    }
  };
  mix(embedding.data.data(), embedding.data.size());
  mix(w_out.data.data(), w_out.data.size());
  mix(out_bias.data(), out_bias.size());
  mix(visual_align.data.data(), visual_align.data.size());
  for (const auto& l : layers) {
    for (const Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) {
      mix(m->data.data(), m->data.size());
    }
    mix(l.b1.data(), l.b1.size());
    mix(l.b2.data(), l.b2.size());
  }
  return h;
}

Vec object_feature(const SceneObject& object, const ModelWeights& weights) {
  const Vocab& vocab = weights.config.vocab;
  const std::size_t d = weights.config.model_dim;
  Vec feat(d, 0.0);
  const int cat_tok = vocab.category_token(object.category);
  if (cat_tok >= Vocab::kNumSpecials) {
    for (std::size_t j = 0; j < d; ++j) feat[j] = weights.embedding.at(cat_tok, j);
  } else {
    // Unknown category: fall back to a pure hash embedding.
    Rng rng(mix_seed(weights.config.seed, hash_symbol(object.category)));
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t j = 0; j < d; ++j) feat[j] = sigma * rng.next_gaussian();
  }
  for (const auto& [slot, value] : object.attributes) {
    int tok = -1;
    if (slot == "color") tok = vocab.color_token(value);
    if (slot == "action") tok = vocab.action_token(value);
    if (tok >= Vocab::kNumSpecials) {
      for (std::size_t j = 0; j < d; ++j) {
        feat[j] += kAttrMix * weights.embedding.at(tok, j);
      }
    }
  }
  return scale(feat, kVisualScale);
}

TokenStream encode_inputs(const Scene& scene, const std::vector<int>& query,
                          const ModelWeights& weights) {
  const std::size_t d = weights.config.model_dim;
  if (scene.objects.size() > weights.config.max_visual_tokens) {
    throw CapacityError("encode_inputs: scene exceeds max_visual_tokens");
  }
  TokenStream stream;
  const std::size_t n = scene.objects.size() + query.size();
  stream.embeddings = Matrix(n, d);
  std::size_t pos = 0;
  for (const auto& object : scene.objects) {
    const Vec aligned = matvec(object_feature(object, weights), weights.visual_align);
    for (std::size_t j = 0; j < d; ++j) stream.embeddings.at(pos, j) = aligned[j];
    stream.visual_indices.push_back(pos);
    ++pos;
  }
  for (int tok : query) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= weights.config.vocab_size) {
      throw std::invalid_argument("encode_inputs: token id out of range");
    }
    for (std::size_t j = 0; j < d; ++j) {
      stream.embeddings.at(pos, j) = weights.embedding.at(tok, j);
    }
    stream.textual_indices.push_back(pos);
    ++pos;
  }
  return stream;
}

ForwardResult forward_step(const TokenStream& stream,
                           const std::vector<int>& prior_tokens,
                           const ModelWeights& weights) {
  const ModelConfig& cfg = weights.config;
  const std::size_t d = cfg.model_dim;
  const std::size_t seq = stream.length() + prior_tokens.size();
  if (seq == 0) throw std::invalid_argument("forward_step: empty context");
  if (seq > kMaxContext) throw CapacityError("forward_step: context overflow");

  ForwardResult result;
  result.states.reserve(cfg.num_layers + 1);

  Matrix x(seq, d);
  for (std::size_t p = 0; p < stream.length(); ++p) {
    for (std::size_t j = 0; j < d; ++j) x.at(p, j) = stream.embeddings.at(p, j);
  }
  for (std::size_t t = 0; t < prior_tokens.size(); ++t) {
    const int tok = prior_tokens[t];
    if (tok < 0 || static_cast<std::size_t>(tok) >= cfg.vocab_size) {
      throw std::invalid_argument("forward_step: prior token out of range");
    }
    for (std::size_t j = 0; j < d; ++j) {
      x.at(stream.length() + t, j) = weights.embedding.at(tok, j);
    }
  }
  result.states.push_back(x);

  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const LayerWeights& lw = weights.layers[l];
    Matrix next(seq, d);
    LayerTrace trace;
    for (std::size_t p = 0; p < seq; ++p) {
      // Causal: position p attends to [0, p].
      Matrix ctx(p + 1, d);
      std::copy(x.data.begin(), x.data.begin() + (p + 1) * d, ctx.data.begin());
      Vec xp(x.data.begin() + p * d, x.data.begin() + (p + 1) * d);
      AttentionOut ao = attend_last(ctx, xp, lw, cfg);
      const Vec attn_out = matvec(ao.concat, lw.wo);
      Vec h_bar(d);
      for (std::size_t j = 0; j < d; ++j) h_bar[j] = attn_out[j] + xp[j];
      const Vec ffn_out = ffn_eval(lw, h_bar);
      for (std::size_t j = 0; j < d; ++j) next.at(p, j) = ffn_out[j] + h_bar[j];
      if (p == seq - 1) {
        trace.attn_rows = ao.attn_rows;
        trace.head_outputs = ao.head_outputs;
        trace.h_bar = h_bar;
        trace.h_out = Vec(next.data.begin() + p * d, next.data.begin() + (p + 1) * d);
      }
    }
    x = next;
    result.states.push_back(x);
    result.traces.push_back(std::move(trace));
  }

  const std::size_t last = seq - 1;
  Vec h_final(x.data.begin() + last * d, x.data.begin() + (last + 1) * d);
  result.logits = add(matvec(h_final, weights.w_out), weights.out_bias);
  return result;
}

AttentionOut attend_last(const Matrix& context, const Vec& x_last,
                         const LayerWeights& lw, const ModelConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t dk = cfg.head_dim();
  const std::size_t seq = context.rows;
  if (x_last.size() != d) throw std::invalid_argument("attend_last: bad x_last");

  const Vec q = matvec(x_last, lw.wq);
  Matrix k(seq, d), v(seq, d);
  for (std::size_t i = 0; i < seq; ++i) {
    Vec row = (i == seq - 1)
                  ? x_last
                  : Vec(context.data.begin() + i * d, context.data.begin() + (i + 1) * d);
    const Vec ki = matvec(row, lw.wk);
    const Vec vi = matvec(row, lw.wv);
    for (std::size_t j = 0; j < d; ++j) {
      k.at(i, j) = ki[j];
      v.at(i, j) = vi[j];
    }
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  AttentionOut out;
  out.attn_rows = Matrix(cfg.num_heads, seq);
  out.head_outputs = Matrix(cfg.num_heads, dk);
  out.concat = Vec(d, 0.0);
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    Vec scores(seq);
    for (std::size_t i = 0; i < seq; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dk; ++j) s += q[h * dk + j] * k.at(i, h * dk + j);
      scores[i] = s * inv_sqrt_dk;
    }
    const ProbVector attn = softmax(scores);
    Vec head(dk, 0.0);
    for (std::size_t i = 0; i < seq; ++i) {
      for (std::size_t j = 0; j < dk; ++j) {
        head[j] += attn.values[i] * v.at(i, h * dk + j);
      }
    }
    for (std::size_t i = 0; i < seq; ++i) out.attn_rows.at(h, i) = attn.values[i];
    for (std::size_t j = 0; j < dk; ++j) {
      out.head_outputs.at(h, j) = head[j];
      out.concat[h * dk + j] = head[j];
    }
  }
  return out;
}

Vec ffn_eval(const LayerWeights& lw, const Vec& h) {
  return add(matvec(relu(add(matvec(h, lw.w1), lw.b1)), lw.w2), lw.b2);
}

std::vector<int> greedy_decode(const TokenStream& stream,
                               const ModelWeights& weights,
                               std::size_t max_tokens) {
  if (max_tokens < 1) throw std::invalid_argument("greedy_decode: max_tokens < 1");
  std::vector<int> out;
  for (std::size_t t = 0; t < max_tokens; ++t) {
    const ForwardResult r = forward_step(stream, out, weights);
    const int tok = static_cast<int>(argmax(r.logits));
    out.push_back(tok);
    if (tok == Vocab::kEos) break;
  }
  return out;
}

namespace {

void write_u64(std::ofstream& f, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::ifstream& f) {
  unsigned char buf[8];
  f.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ofstream& f, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    write_u64(f, bits);
  }
}

void read_doubles(std::ifstream& f, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = read_u64(f);
    std::memcpy(&data[i], &bits, sizeof bits);
  }
}

}  // namespace

void save_weights(const ModelWeights& weights, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_weights: cannot open " + path);
  f.write(kMagic, 8);
  const ModelConfig& c = weights.config;
  write_u64(f, c.num_layers);
  write_u64(f, c.num_heads);
  write_u64(f, c.model_dim);
  write_u64(f, c.vocab_size);
  write_u64(f, c.max_visual_tokens);
  write_u64(f, c.seed);
  write_doubles(f, weights.embedding.data.data(), weights.embedding.data.size());
  write_doubles(f, weights.w_out.data.data(), weights.w_out.data.size());
  write_doubles(f, weights.out_bias.data(), weights.out_bias.size());
  write_doubles(f, weights.visual_align.data.data(), weights.visual_align.data.size());
  for (const auto& l : weights.layers) {
    for (const Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) {
      write_doubles(f, m->data.data(), m->data.size());
    }
    write_doubles(f, l.b1.data(), l.b1.size());
    write_doubles(f, l.b2.data(), l.b2.size());
  }
}

ModelWeights load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_weights: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("load_weights: bad magic in " + path);
  }
  ModelConfig c;
  c.num_layers = read_u64(f);
  c.num_heads = read_u64(f);
  c.model_dim = read_u64(f);
  c.vocab_size = read_u64(f);
  c.max_visual_tokens = read_u64(f);
  c.seed = read_u64(f);
  c.validate();

  ModelWeights w;
  w.config = c;
  const std::size_t d = c.model_dim;
  w.embedding = Matrix(c.vocab_size, d);
  read_doubles(f, w.embedding.data.data(), w.embedding.data.size());
  w.w_out = Matrix(d, c.vocab_size);
  read_doubles(f, w.w_out.data.data(), w.w_out.data.size());
  w.out_bias = Vec(c.vocab_size);
  read_doubles(f, w.out_bias.data(), w.out_bias.size());
  w.visual_align = Matrix(d, d);
  read_doubles(f, w.visual_align.data.data(), w.visual_align.data.size());
  w.layers.resize(c.num_layers);
  for (auto& l : w.layers) {
    l.wq = Matrix(d, d);
    l.wk = Matrix(d, d);
    l.wv = Matrix(d, d);
    l.wo = Matrix(d, d);
    l.w1 = Matrix(d, c.ffn_dim());
    l.w2 = Matrix(c.ffn_dim(), d);
    for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) {
      read_doubles(f, m->data.data(), m->data.size());
    }
    l.b1 = Vec(c.ffn_dim());
    read_doubles(f, l.b1.data(), l.b1.size());
    l.b2 = Vec(d);
    read_doubles(f, l.b2.data(), l.b2.size());
  }
  if (!f) throw std::runtime_error("load_weights: truncated file " + path);
  return w;
}

}  // namespace inex
