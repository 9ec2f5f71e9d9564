#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xgft/rng.hpp"
#include "xgft/tensor.hpp"

namespace xgft {

enum class Init { FanIn, Embedding };

struct ParamEntry {
  std::string name;
  Tensor value;
  Tensor grad;  // accumulator, always same shape as value
};

// Named parameter registry with per-entry gradient accumulators. Entry order
// is the registration order and is stable across runs, which checkpointing
// and deterministic gradient reduction rely on.
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t seed) : seed_(seed) {}

  // Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) where fan_in is the product of
  // all non-leading dimensions (the length for 1-D entries); embeddings use
  // uniform(-0.1, 0.1). Values depend only on (name, seed).
  int add(const std::string& name, std::vector<int> shape,
          Init kind = Init::FanIn);

  bool contains(const std::string& name) const {
    return index_.count(name) != 0;
  }
  int index_of(const std::string& name) const;

  int size() const { return static_cast<int>(items_.size()); }
  ParamEntry& at(int i) { return items_[static_cast<std::size_t>(i)]; }
  const ParamEntry& at(int i) const { return items_[static_cast<std::size_t>(i)]; }

  void zero_grads() {
    for (auto& p : items_) p.grad.fill_(0.0);
  }

  long total_entries() const {
    long n = 0;
    for (const auto& p : items_) n += p.value.numel();
    return n;
  }

  std::uint64_t seed() const { return seed_; }

  // Checksum over all values; used to assert snapshot isolation between
  // update barriers.
  std::uint64_t value_checksum() const;

 private:
  std::vector<ParamEntry> items_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t seed_;
};

// Max relative finite-difference error over random parameter entries.
// `f(ps, with_grads)` evaluates the scalar objective; when with_grads is true
// it must also accumulate analytic gradients into ps. The error metric is
// |analytic - numeric| / max(1, |analytic|).
double grad_check(ParameterSet& ps,
                  const std::function<double(ParameterSet&, bool)>& f,
                  int probes, double h, Rng& rng);

}  // namespace xgft
