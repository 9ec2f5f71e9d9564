#include "xgft/params.hpp"

#include <cmath>
#include <cstring>

namespace xgft {

int ParameterSet::add(const std::string& name, std::vector<int> shape,
                      Init kind) {
  check(!shape.empty(), "parameter '" + name + "': empty shape");
  check(index_.find(name) == index_.end(),
        "parameter '" + name + "' already registered");
  ParamEntry e;
  e.name = name;
  e.value = Tensor::zeros(shape);
  e.grad = Tensor::zeros(shape);

  // Draw from a stream keyed by (name, seed) so values do not depend on
  // registration order.
  Rng rng(seed_ ^ fnv1a64(name));
  if (kind == Init::Embedding) {
    for (double& v : e.value.data) v = rng.uniform(-0.1, 0.1);
  } else {
    long fan_in = 1;
    if (shape.size() == 1) {
      fan_in = shape[0];
    } else {
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    }
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : e.value.data) v = rng.uniform(-bound, bound);
  }

  items_.push_back(std::move(e));
  const int idx = static_cast<int>(items_.size()) - 1;
  index_[name] = idx;
  return idx;
}

int ParameterSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  check(it != index_.end(), "unknown parameter '" + name + "'");
  return it->second;
}

std::uint64_t ParameterSet::value_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : items_) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = fnv1a64(p.value.data.data(), p.value.data.size() * sizeof(double), h);
  }
  return h;
}

double grad_check(ParameterSet& ps,
                  const std::function<double(ParameterSet&, bool)>& f,
                  int probes, double h, Rng& rng) {
  ps.zero_grads();
  f(ps, true);
  // Snapshot analytic gradients; probes below re-run the forward only.
  std::vector<Tensor> analytic;
  analytic.reserve(static_cast<std::size_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i) analytic.push_back(ps.at(i).grad);

  const long total = ps.total_entries();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    long flat = static_cast<long>(rng.uniform() * static_cast<double>(total));
    if (flat >= total) flat = total - 1;
    int pi = 0;
    while (flat >= ps.at(pi).value.numel()) {
      flat -= ps.at(pi).value.numel();
      ++pi;
    }
    double& theta = ps.at(pi).value.data[static_cast<std::size_t>(flat)];
    const double orig = theta;
    theta = orig + h;
    const double fp = f(ps, false);
    theta = orig - h;
    const double fm = f(ps, false);
    theta = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double exact = analytic[static_cast<std::size_t>(pi)]
                             .data[static_cast<std::size_t>(flat)];
    const double rel =
        std::fabs(exact - numeric) / std::max(1.0, std::fabs(exact));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace xgft
