#pragma once

#include <string>

#include "xgft/trainer.hpp"

namespace xgft {

// Checkpoint layout (all integers little-endian):
//   magic "XGFT", u32 format version
//   params:  u32 count, then per entry: u32 name length, name bytes,
//            u32 ndim, u32 dims..., f32 values  (the interchange format
//            other tools consume)
//   optimizer: per entry, f64 second-moment then f64 momentum buffers
//   counters: u64 batch index, env steps, sessions
//   trailing windows: per task u32 length + outcome bytes
//   workers: u32 count, then per worker: rng state string, u32 level,
//            u32 window length + (task, success) byte pairs
//
// The write path first rounds the live parameters through f32 so the stored
// records equal the post-write training state exactly, then abandons every
// worker session; a resumed run and the uninterrupted run therefore continue
// from identical state, bit for bit.
void save_checkpoint(const std::string& path, Trainer& trainer);

// Restores a trainer built from the same configuration. Rejects bad magic,
// unknown versions, and parameter registries that do not match.
void load_checkpoint(const std::string& path, Trainer& trainer);

// Parameter records only (for evaluation-time model loading).
void load_params(const std::string& path, ParameterSet& ps);

}  // namespace xgft
