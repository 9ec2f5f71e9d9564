#pragma once

#include <string>
#include <vector>

#include "xgft/graph.hpp"

namespace xgft {

// Sum-pooled word embeddings; order-invariant by construction.
inline int encode_bow(Graph& g, int table, const std::vector<int>& tokens) {
  return g.embed_sum(table, tokens);
}

// One guided transformation step: g(T · [C; 1ᵀ]) with T of shape D×(D+1)
// applied to a D×N feature cube.
int gft_step(Graph& g, int feature_cube, int transform, Act act = Act::Relu);

// Sequential composition of gft_step over a stack of transforms.
int gft_apply(Graph& g, int feature_cube, const std::vector<int>& transforms,
              Act act = Act::Relu);

// Per-channel modulation g(diag(lambda)·C + b); the diagonal special case of
// a guided step, computed through row ops rather than a matrix product.
int film_apply(Graph& g, int feature_cube, int lambda, int bias,
               Act act = Act::Relu);

// Transform generator: a shared first layer (relu) and one linear output head
// per step, each emitting a D×(D+1) matrix from the sentence embedding.
struct GftModule {
  int steps = 1;
  int channels = 0;
  Act act = Act::Relu;
  int w1 = -1, b1 = -1;
  std::vector<int> w2, b2;

  GftModule() = default;
  GftModule(ParameterSet& ps, const std::string& prefix, int embed_width,
            int hidden, int channels, int steps, Act act = Act::Relu);
  std::vector<int> transforms(Graph& g, int bow) const;
  int apply(Graph& g, int feature_cube, int bow) const;  // D×N
};

struct FilmModule {
  int channels = 0;
  Act act = Act::Relu;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

  FilmModule() = default;
  FilmModule(ParameterSet& ps, const std::string& prefix, int embed_width,
             int hidden, int channels, Act act = Act::Relu);
  int apply(Graph& g, int feature_cube, int bow) const;  // D×N
};

// Gate vector in [0,1]^D weighting the feature maps.
struct GatedModule {
  int channels = 0;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

  GatedModule() = default;
  GatedModule(ParameterSet& ps, const std::string& prefix, int embed_width,
              int hidden, int channels);
  int gate(Graph& g, int bow) const;
  int apply(Graph& g, int feature_cube, int bow) const;  // D×N
};

// Projects the flattened cube to a visual embedding gated elementwise by a
// sigmoid projection of the sentence embedding.
struct CGatedModule {
  int width = 0;
  int wv = -1, bv = -1, wg = -1, bg = -1;

  CGatedModule() = default;
  CGatedModule(ParameterSet& ps, const std::string& prefix, int embed_width,
               int flat_len, int width);
  int apply(Graph& g, int feature_cube, int bow) const;  // [width]
};

// Relu projections of image and sentence, concatenated.
struct ConcatModule {
  int width = 0;
  int wv = -1, bv = -1, wl = -1, bl = -1;

  ConcatModule() = default;
  ConcatModule(ParameterSet& ps, const std::string& prefix, int embed_width,
               int flat_len, int width);
  int apply(Graph& g, int feature_cube, int bow) const;  // [2*width]
};

// The sentence embedding acts directly as a 1x1 filter producing an attention
// map; a learned 1x1 filter produces an environment map; both relu, stacked.
struct ConceptModule {
  int channels = 0;
  int w = -1, b = -1;

  ConceptModule() = default;
  ConceptModule(ParameterSet& ps, const std::string& prefix, int channels);
  int apply(Graph& g, int feature_cube, int bow) const;  // [2×N]
};

// 7x7 (or k x k) uniform smoothing with edge-clamped borders.
Tensor uniform_smooth(const Tensor& m, int kernel = 7);

// Mean-subtracted, smoothed transform matrices for qualitative comparison.
// Shapes of transforms and reference means must agree.
std::vector<Tensor> transform_fingerprint(const std::vector<Tensor>& transforms,
                                          const std::vector<Tensor>& reference_mean,
                                          int kernel = 7);

}  // namespace xgft
