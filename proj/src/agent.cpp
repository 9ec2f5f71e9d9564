#include "xgft/agent.hpp"

namespace xgft {

AgentConfig AgentConfig::desk() {
  AgentConfig c;
  c.channels = 16;
  c.embed_width = 32;
  c.gen_hidden = 32;
  c.action_embed = 32;
  c.h_a_width = 32;
  c.h_m_width = 64;
  c.f_width = 64;
  c.preprocess_width = 64;
  c.policy_hidden = 64;
  c.value_hidden = 64;
  c.proj_width = 64;
  c.cnn = {{8, 4, 8}, {4, 2, 16}, {3, 1, 16}};
  return c;
}

void AgentConfig::validate() const {
  static const char* kFusions[] = {"gft1", "gft2",   "gft3",  "concat",
                                   "gated", "cgated", "film", "concept"};
  bool ok = false;
  for (const char* f : kFusions)
    if (fusion == f) ok = true;
  check(ok, "agent: unknown fusion '" + fusion + "'");
  check(!cnn.empty(), "agent: empty conv spec");
  check(cnn.back().filters == channels,
        "agent: last conv layer must emit `channels` filters");
  for (const auto& l : cnn)
    check(l.size >= 1 && l.stride >= 1 && l.filters >= 1,
          "agent: bad conv spec entry");
  check(embed_width > 0 && gen_hidden > 0 && action_embed > 0 &&
            h_a_width > 0 && h_m_width > 0 && f_width > 0 &&
            preprocess_width > 0 && policy_hidden > 0 && value_hidden > 0 &&
            proj_width > 0,
        "agent: widths must be positive");
}

GruParams make_gru(ParameterSet& ps, const std::string& prefix, int in_width,
                   int width) {
  GruParams p;
  p.wr = ps.add(prefix + ".wr", {width, in_width});
  p.ur = ps.add(prefix + ".ur", {width, width});
  p.br = ps.add(prefix + ".br", {width});
  p.wz = ps.add(prefix + ".wz", {width, in_width});
  p.uz = ps.add(prefix + ".uz", {width, width});
  p.bz = ps.add(prefix + ".bz", {width});
  p.wh = ps.add(prefix + ".wh", {width, in_width});
  p.uh = ps.add(prefix + ".uh", {width, width});
  p.bh = ps.add(prefix + ".bh", {width});
  return p;
}

int gru_step(Graph& g, const GruParams& p, int x, int h) {
  const int r = g.sigmoid(
      g.add(g.affine(x, g.param(p.wr), g.param(p.br)), g.linear(h, g.param(p.ur))));
  const int z = g.sigmoid(
      g.add(g.affine(x, g.param(p.wz), g.param(p.bz)), g.linear(h, g.param(p.uz))));
  const int cand = g.tanh_(g.add(g.affine(x, g.param(p.wh), g.param(p.bh)),
                                 g.linear(g.mul(r, h), g.param(p.uh))));
  const int keep = g.mul(g.add_const(g.scale(z, -1.0), 1.0), h);
  return g.add(keep, g.mul(z, cand));
}

AgentNet::AgentNet(ParameterSet& ps, AgentConfig cfg, int vocab_size)
    : ps_(&ps), cfg_(std::move(cfg)) {
  cfg_.validate();
  // the concept fusion uses the sentence embedding as a 1x1 filter over the
  // cube, which pins the word-embedding length to the channel count
  if (cfg_.fusion == "concept") cfg_.embed_width = cfg_.channels;

  word_table_ = ps.add("embed.word", {vocab_size, cfg_.embed_width},
                       Init::Embedding);

  int side = kImageSize;
  int in_ch = 3;
  for (std::size_t i = 0; i < cfg_.cnn.size(); ++i) {
    const auto& l = cfg_.cnn[i];
    check(side >= l.size, "agent: conv kernel exceeds input");
    conv_filters_.push_back(ps.add("cnn." + std::to_string(i) + ".w",
                                   {l.filters, in_ch, l.size, l.size}));
    side = (side - l.size) / l.stride + 1;
    in_ch = l.filters;
  }
  locations_ = side * side;

  const int d = cfg_.channels;
  const int n = locations_;
  if (cfg_.gft_steps() > 0) {
    gft_ = GftModule(ps, "gft", cfg_.embed_width, cfg_.gen_hidden, d,
                     cfg_.gft_steps());
    feature_len_ = d * n;
  } else if (cfg_.fusion == "film") {
    film_ = FilmModule(ps, "film", cfg_.embed_width, cfg_.gen_hidden, d);
    feature_len_ = d * n;
  } else if (cfg_.fusion == "gated") {
    gated_ = GatedModule(ps, "gated", cfg_.embed_width, cfg_.gen_hidden, d);
    feature_len_ = d * n;
  } else if (cfg_.fusion == "cgated") {
    cgated_ = CGatedModule(ps, "cgated", cfg_.embed_width, d * n, cfg_.proj_width);
    feature_len_ = cfg_.proj_width;
  } else if (cfg_.fusion == "concat") {
    concat_ = ConcatModule(ps, "concat", cfg_.embed_width, d * n, cfg_.proj_width);
    feature_len_ = 2 * cfg_.proj_width;
  } else {  // concept
    concept_ = ConceptModule(ps, "concept", d);
    feature_len_ = 2 * n;
  }

  action_table_ = ps.add("embed.action", {kActionCount + 1, cfg_.action_embed},
                         Init::Embedding);

  pre_m_w_ = ps.add("pre_m.w", {cfg_.preprocess_width, feature_len_});
  pre_m_b_ = ps.add("pre_m.b", {cfg_.preprocess_width});
  gru_m_ = make_gru(ps, "gru_m", cfg_.preprocess_width, cfg_.h_m_width);
  gru_a_ = make_gru(ps, "gru_a", cfg_.action_embed, cfg_.h_a_width);
  pre_f_w_ = ps.add("pre_f.w",
                    {cfg_.preprocess_width, cfg_.h_m_width + cfg_.h_a_width});
  pre_f_b_ = ps.add("pre_f.b", {cfg_.preprocess_width});
  gru_f_ = make_gru(ps, "gru_f", cfg_.preprocess_width, cfg_.f_width);

  pol1_w_ = ps.add("policy.fc1.w", {cfg_.policy_hidden, cfg_.f_width});
  pol1_b_ = ps.add("policy.fc1.b", {cfg_.policy_hidden});
  pol2_w_ = ps.add("policy.fc2.w", {kActionCount, cfg_.policy_hidden});
  pol2_b_ = ps.add("policy.fc2.b", {kActionCount});
  val1_w_ = ps.add("value.fc1.w", {cfg_.value_hidden, cfg_.f_width});
  val1_b_ = ps.add("value.fc1.b", {cfg_.value_hidden});
  val2_w_ = ps.add("value.fc2.w", {1, cfg_.value_hidden});
  val2_b_ = ps.add("value.fc2.b", {1});
}

int AgentNet::apply_fusion(Graph& g, int cube, int bow) const {
  if (cfg_.gft_steps() > 0) return gft_.apply(g, cube, bow);
  if (cfg_.fusion == "film") return film_.apply(g, cube, bow);
  if (cfg_.fusion == "gated") return gated_.apply(g, cube, bow);
  if (cfg_.fusion == "cgated") return cgated_.apply(g, cube, bow);
  if (cfg_.fusion == "concat") return concat_.apply(g, cube, bow);
  return concept_.apply(g, cube, bow);
}

int AgentNet::perceive(Graph& g, const Observation& o,
                       const std::vector<int>& tokens) const {
  Tensor img = Tensor::zeros({3, kImageSize, kImageSize});
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      for (int c = 0; c < 3; ++c)
        img.data[static_cast<std::size_t>((c * kImageSize + y) * kImageSize + x)] =
            o.image[static_cast<std::size_t>((y * kImageSize + x) * 3 + c)] /
            255.0;
  int cur = g.constant(std::move(img));
  for (std::size_t i = 0; i < cfg_.cnn.size(); ++i)
    cur = g.relu(g.conv2d(cur, g.param(conv_filters_[i]), cfg_.cnn[i].stride));
  const int cube = g.reshape(cur, {cfg_.channels, locations_});
  const int bow = encode_bow(g, g.param(word_table_), tokens);
  const int fused = apply_fusion(g, cube, bow);
  return g.reshape(fused, {feature_len_});
}

HistoryNodes AgentNet::history_nodes(Graph& g, const History& h) const {
  HistoryNodes n;
  n.h_m = g.constant(h.h_m);
  n.h_a = g.constant(h.h_a);
  n.f = g.constant(h.f);
  n.prev_action = h.prev_action;
  return n;
}

std::pair<PolicyNodes, HistoryNodes> AgentNet::act_value(
    Graph& g, int fused, const HistoryNodes& prev) const {
  const int pm = g.relu(g.affine(fused, g.param(pre_m_w_), g.param(pre_m_b_)));
  const int h_m = gru_step(g, gru_m_, pm, prev.h_m);
  const int a_embed =
      g.embed_sum(g.param(action_table_), {prev.prev_action});
  const int h_a = gru_step(g, gru_a_, a_embed, prev.h_a);
  const int pf = g.relu(g.affine(g.concat(h_m, h_a), g.param(pre_f_w_),
                                 g.param(pre_f_b_)));
  const int f = gru_step(g, gru_f_, pf, prev.f);

  PolicyNodes out;
  const int ph = g.relu(g.affine(f, g.param(pol1_w_), g.param(pol1_b_)));
  const int logits = g.affine(ph, g.param(pol2_w_), g.param(pol2_b_));
  out.pi = g.softmax_rows(logits);
  out.logpi = g.log_softmax_rows(logits);
  const int vh = g.relu(g.affine(f, g.param(val1_w_), g.param(val1_b_)));
  out.v = g.affine(vh, g.param(val2_w_), g.param(val2_b_));

  HistoryNodes next;
  next.h_m = h_m;
  next.h_a = h_a;
  next.f = f;
  next.prev_action = prev.prev_action;  // caller overwrites after sampling
  return {out, next};
}

History AgentNet::reset_history() const {
  History h;
  h.h_m = Tensor::zeros({cfg_.h_m_width});
  h.h_a = Tensor::zeros({cfg_.h_a_width});
  h.f = Tensor::zeros({cfg_.f_width});
  h.prev_action = kStartAction;
  return h;
}

History AgentNet::detach(const Graph& g, const HistoryNodes& h) const {
  History out;
  out.h_m = g.value(h.h_m);
  out.h_a = g.value(h.h_a);
  out.f = g.value(h.f);
  out.prev_action = h.prev_action;
  return out;
}

int AgentNet::sample_action(const Tensor& pi, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0;
  for (int i = 0; i < kActionCount; ++i) {
    acc += pi.data[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  return kActionCount - 1;
}

int AgentNet::greedy_action(const Tensor& pi) {
  int best = 0;
  for (int i = 1; i < kActionCount; ++i)
    if (pi.data[static_cast<std::size_t>(i)] >
        pi.data[static_cast<std::size_t>(best)])
      best = i;
  return best;
}

std::vector<Tensor> AgentNet::gft_transform_values(
    const std::vector<int>& tokens) const {
  check(cfg_.gft_steps() > 0,
        "agent: transform matrices exist only for guided-transform fusions");
  Graph g(ps_);
  const int bow = encode_bow(g, g.param(word_table_), tokens);
  std::vector<Tensor> out;
  for (int t : gft_.transforms(g, bow)) out.push_back(g.value(t));
  return out;
}

}  // namespace xgft
