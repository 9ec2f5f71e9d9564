#include "xgft/grounding.hpp"

namespace xgft {

int gft_step(Graph& g, int feature_cube, int transform, Act act) {
  const Tensor& c = g.value(feature_cube);
  const Tensor& t = g.value(transform);
  check(c.ndim() == 2, "gft_step: feature cube must be D×N");
  check(t.ndim() == 2 && t.rows() == c.rows() && t.cols() == c.rows() + 1,
        "gft_step: transform must be D×(D+1) with D matching the cube");
  return g.activate(g.matmul(transform, g.append_ones_row(feature_cube)), act);
}

int gft_apply(Graph& g, int feature_cube, const std::vector<int>& transforms,
              Act act) {
  check(!transforms.empty(), "gft_apply: empty transform stack");
  int cur = feature_cube;
  for (int t : transforms) cur = gft_step(g, cur, t, act);
  return cur;
}

int film_apply(Graph& g, int feature_cube, int lambda, int bias, Act act) {
  return g.activate(g.row_bias(g.row_scale(feature_cube, lambda), bias), act);
}

GftModule::GftModule(ParameterSet& ps, const std::string& prefix,
                     int embed_width, int hidden, int channels_, int steps_,
                     Act act_)
    : steps(steps_), channels(channels_), act(act_) {
  check(steps >= 1 && steps <= 3, "gft: step count must be 1..3");
  w1 = ps.add(prefix + ".fc1.w", {hidden, embed_width});
  b1 = ps.add(prefix + ".fc1.b", {hidden});
  for (int j = 0; j < steps; ++j) {
    w2.push_back(ps.add(prefix + ".t" + std::to_string(j) + ".w",
                        {channels * (channels + 1), hidden}));
    b2.push_back(ps.add(prefix + ".t" + std::to_string(j) + ".b",
                        {channels * (channels + 1)}));
  }
}

std::vector<int> GftModule::transforms(Graph& g, int bow) const {
  const int hidden = g.relu(g.affine(bow, g.param(w1), g.param(b1)));
  std::vector<int> out;
  for (int j = 0; j < steps; ++j) {
    const int flat = g.affine(hidden, g.param(w2[static_cast<std::size_t>(j)]),
                              g.param(b2[static_cast<std::size_t>(j)]));
    out.push_back(g.reshape(flat, {channels, channels + 1}));
  }
  return out;
}

int GftModule::apply(Graph& g, int feature_cube, int bow) const {
  return gft_apply(g, feature_cube, transforms(g, bow), act);
}

FilmModule::FilmModule(ParameterSet& ps, const std::string& prefix,
                       int embed_width, int hidden, int channels_, Act act_)
    : channels(channels_), act(act_) {
  w1 = ps.add(prefix + ".fc1.w", {hidden, embed_width});
  b1 = ps.add(prefix + ".fc1.b", {hidden});
  w2 = ps.add(prefix + ".fc2.w", {2 * channels, hidden});
  b2 = ps.add(prefix + ".fc2.b", {2 * channels});
}

int FilmModule::apply(Graph& g, int feature_cube, int bow) const {
  const int hidden = g.relu(g.affine(bow, g.param(w1), g.param(b1)));
  const int out = g.affine(hidden, g.param(w2), g.param(b2));  // no activation
  const int lambda = g.slice(out, 0, channels);
  const int bias = g.slice(out, channels, channels);
  return film_apply(g, feature_cube, lambda, bias, act);
}

GatedModule::GatedModule(ParameterSet& ps, const std::string& prefix,
                         int embed_width, int hidden, int channels_)
    : channels(channels_) {
  w1 = ps.add(prefix + ".fc1.w", {hidden, embed_width});
  b1 = ps.add(prefix + ".fc1.b", {hidden});
  w2 = ps.add(prefix + ".fc2.w", {channels, hidden});
  b2 = ps.add(prefix + ".fc2.b", {channels});
}

int GatedModule::gate(Graph& g, int bow) const {
  const int hidden = g.relu(g.affine(bow, g.param(w1), g.param(b1)));
  return g.sigmoid(g.affine(hidden, g.param(w2), g.param(b2)));
}

int GatedModule::apply(Graph& g, int feature_cube, int bow) const {
  return g.row_scale(feature_cube, gate(g, bow));
}

CGatedModule::CGatedModule(ParameterSet& ps, const std::string& prefix,
                           int embed_width, int flat_len, int width_)
    : width(width_) {
  wv = ps.add(prefix + ".vis.w", {width, flat_len});
  bv = ps.add(prefix + ".vis.b", {width});
  wg = ps.add(prefix + ".gate.w", {width, embed_width});
  bg = ps.add(prefix + ".gate.b", {width});
}

int CGatedModule::apply(Graph& g, int feature_cube, int bow) const {
  const Tensor& c = g.value(feature_cube);
  const int flat = g.reshape(feature_cube, {static_cast<int>(c.numel())});
  const int vis = g.relu(g.affine(flat, g.param(wv), g.param(bv)));
  const int gate = g.sigmoid(g.affine(bow, g.param(wg), g.param(bg)));
  return g.mul(vis, gate);
}

ConcatModule::ConcatModule(ParameterSet& ps, const std::string& prefix,
                           int embed_width, int flat_len, int width_)
    : width(width_) {
  wv = ps.add(prefix + ".vis.w", {width, flat_len});
  bv = ps.add(prefix + ".vis.b", {width});
  wl = ps.add(prefix + ".lang.w", {width, embed_width});
  bl = ps.add(prefix + ".lang.b", {width});
}

int ConcatModule::apply(Graph& g, int feature_cube, int bow) const {
  const Tensor& c = g.value(feature_cube);
  const int flat = g.reshape(feature_cube, {static_cast<int>(c.numel())});
  const int vis = g.relu(g.affine(flat, g.param(wv), g.param(bv)));
  const int lang = g.relu(g.affine(bow, g.param(wl), g.param(bl)));
  return g.concat(vis, lang);
}

ConceptModule::ConceptModule(ParameterSet& ps, const std::string& prefix,
                             int channels_)
    : channels(channels_) {
  w = ps.add(prefix + ".filter.w", {channels});
  b = ps.add(prefix + ".filter.b", {1});
}

int ConceptModule::apply(Graph& g, int feature_cube, int bow) const {
  const Tensor& c = g.value(feature_cube);
  check(c.rows() == channels, "concept: cube channel mismatch");
  check(g.value(bow).numel() == channels,
        "concept: sentence embedding length must equal the channel count");
  const int n = c.cols();
  const int attention =
      g.relu(g.matmul(g.reshape(bow, {1, channels}), feature_cube));
  const int env = g.relu(g.row_bias(
      g.matmul(g.reshape(g.param(w), {1, channels}), feature_cube), g.param(b)));
  return g.reshape(g.concat(g.reshape(attention, {n}), g.reshape(env, {n})),
                   {2, n});
}

Tensor uniform_smooth(const Tensor& m, int kernel) {
  check(m.ndim() == 2, "uniform_smooth: expects a matrix");
  check(kernel >= 1 && kernel % 2 == 1, "uniform_smooth: kernel must be odd");
  const int rows = m.rows(), cols = m.cols(), half = kernel / 2;
  Tensor out = Tensor::zeros({rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0;
      for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc) {
          const int rr = std::min(std::max(r + dr, 0), rows - 1);
          const int cc = std::min(std::max(c + dc, 0), cols - 1);
          s += m.at(rr, cc);
        }
      out.at(r, c) = s / (kernel * kernel);
    }
  return out;
}

std::vector<Tensor> transform_fingerprint(const std::vector<Tensor>& transforms,
                                          const std::vector<Tensor>& reference_mean,
                                          int kernel) {
  check(transforms.size() == reference_mean.size(),
        "fingerprint: step count mismatch");
  std::vector<Tensor> out;
  for (std::size_t j = 0; j < transforms.size(); ++j) {
    check(transforms[j].same_shape(reference_mean[j]),
          "fingerprint: transform/mean shape mismatch");
    Tensor centered = transforms[j];
    for (std::size_t i = 0; i < centered.data.size(); ++i)
      centered.data[i] -= reference_mean[j].data[i];
    out.push_back(uniform_smooth(centered, kernel));
  }
  return out;
}

}  // namespace xgft
