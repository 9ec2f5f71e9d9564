#pragma once

#include <string>
#include <vector>

#include "xgft/environment.hpp"
#include "xgft/grounding.hpp"

namespace xgft {

struct ConvSpec {
  int size = 0, stride = 1, filters = 0;
};

struct AgentConfig {
  std::string fusion = "gft1";  // gft1|gft2|concat|gated|cgated|film|concept
  int channels = 64;            // feature cube depth; equals the last conv width
  int embed_width = 128;        // word embedding length
  int gen_hidden = 128;         // fusion generator hidden width
  int action_embed = 128;
  int h_a_width = 128;
  int h_m_width = 512;
  int f_width = 512;
  int preprocess_width = 512;
  int policy_hidden = 512;
  int value_hidden = 512;
  int proj_width = 512;  // concat/cgated projection width
  std::vector<ConvSpec> cnn = {{8, 4, 32}, {4, 2, 64}, {3, 1, 64}};

  // CPU-friendly profile used by the desk-scale experiments.
  static AgentConfig desk();

  int gft_steps() const {
    if (fusion == "gft1") return 1;
    if (fusion == "gft2") return 2;
    if (fusion == "gft3") return 3;
    return 0;
  }
  void validate() const;
};

constexpr int kStartAction = kActionCount;  // history token before any action

struct History {
  Tensor h_m, h_a, f;
  int prev_action = kStartAction;
};

struct HistoryNodes {
  int h_m = -1, h_a = -1, f = -1;
  int prev_action = kStartAction;
};

struct PolicyNodes {
  int pi = -1;      // 6 action probabilities
  int logpi = -1;   // log-probabilities (shared logits)
  int v = -1;       // scalar value estimate
};

struct GruParams {
  int wr = -1, ur = -1, br = -1;
  int wz = -1, uz = -1, bz = -1;
  int wh = -1, uh = -1, bh = -1;
};

GruParams make_gru(ParameterSet& ps, const std::string& prefix, int in_width,
                   int width);
// r = σ(Wr x + Ur h + br); z = σ(Wz x + Uz h + bz);
// h' = (1-z)⊙h + z⊙tanh(W x + U(r⊙h) + bh)
int gru_step(Graph& g, const GruParams& p, int x, int h);

// Perception-and-control network: CNN -> grounding fusion -> three GRUs
// (visual history, action history, fused latent) -> shared policy/value heads.
class AgentNet {
 public:
  AgentNet(ParameterSet& ps, AgentConfig cfg, int vocab_size);

  // CNN + configured fusion, flattened to one vector.
  int perceive(Graph& g, const Observation& o,
               const std::vector<int>& tokens) const;

  HistoryNodes history_nodes(Graph& g, const History& h) const;
  // One recurrence step. The action-history GRU absorbs the previous action
  // inside this call, so the fused GRU sees the action state exactly one step
  // behind the visual state.
  std::pair<PolicyNodes, HistoryNodes> act_value(Graph& g, int fused,
                                                 const HistoryNodes& prev) const;

  History reset_history() const;
  History detach(const Graph& g, const HistoryNodes& h) const;

  static int sample_action(const Tensor& pi, Rng& rng);
  static int greedy_action(const Tensor& pi);

  // Transform matrices for a command (guided-transform fusions only).
  std::vector<Tensor> gft_transform_values(const std::vector<int>& tokens) const;

  int feature_len() const { return feature_len_; }
  int locations() const { return locations_; }
  const AgentConfig& config() const { return cfg_; }
  ParameterSet& params() const { return *ps_; }

 private:
  int apply_fusion(Graph& g, int cube, int bow) const;

  ParameterSet* ps_;
  AgentConfig cfg_;
  int word_table_ = -1;
  int action_table_ = -1;
  std::vector<int> conv_filters_;
  GftModule gft_;
  FilmModule film_;
  GatedModule gated_;
  CGatedModule cgated_;
  ConcatModule concat_;
  ConceptModule concept_;
  int pre_m_w_ = -1, pre_m_b_ = -1;
  int pre_f_w_ = -1, pre_f_b_ = -1;
  GruParams gru_m_, gru_a_, gru_f_;
  int pol1_w_ = -1, pol1_b_ = -1, pol2_w_ = -1, pol2_b_ = -1;
  int val1_w_ = -1, val1_b_ = -1, val2_w_ = -1, val2_b_ = -1;
  int locations_ = 0;
  int feature_len_ = 0;
};

}  // namespace xgft
