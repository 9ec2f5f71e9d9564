#include "xgft/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace xgft {

namespace {

constexpr char kMagic[4] = {'X', 'G', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  check(is.good(), "checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  const std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

float get_f32(std::istream& is) {
  const std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string get_str(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  check(is.good(), "checkpoint: truncated file");
  return s;
}

void read_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  check(is.good() && std::memcmp(magic, kMagic, 4) == 0,
        "checkpoint: bad magic");
  const std::uint32_t version = get_u32(is);
  check(version == kVersion, "checkpoint: unsupported format version " +
                                 std::to_string(version));
}

void read_params(std::istream& is, ParameterSet& ps) {
  const std::uint32_t count = get_u32(is);
  check(static_cast<int>(count) == ps.size(),
        "checkpoint: parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_str(is);
    ParamEntry& p = ps.at(static_cast<int>(i));
    check(p.name == name, "checkpoint: parameter '" + name +
                              "' does not match registry entry '" + p.name + "'");
    const std::uint32_t ndim = get_u32(is);
    check(static_cast<int>(ndim) == p.value.ndim(),
          "checkpoint: rank mismatch for '" + name + "'");
    for (std::uint32_t d = 0; d < ndim; ++d)
      check(static_cast<int>(get_u32(is)) == p.value.dim(static_cast<int>(d)),
            "checkpoint: shape mismatch for '" + name + "'");
    for (double& v : p.value.data) v = static_cast<double>(get_f32(is));
  }
}

}  // namespace

void save_checkpoint(const std::string& path, Trainer& trainer) {
  ParameterSet& ps = trainer.params();
  // round the live values through f32 so the file equals the state the run
  // continues from
  for (int i = 0; i < ps.size(); ++i)
    for (double& v : ps.at(i).value.data)
      v = static_cast<double>(static_cast<float>(v));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), "checkpoint: cannot write '" + path + "'");
  os.write(kMagic, 4);
  put_u32(os, kVersion);

  put_u32(os, static_cast<std::uint32_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i) {
    const ParamEntry& p = ps.at(i);
    put_str(os, p.name);
    put_u32(os, static_cast<std::uint32_t>(p.value.ndim()));
    for (int d = 0; d < p.value.ndim(); ++d)
      put_u32(os, static_cast<std::uint32_t>(p.value.dim(d)));
    for (double v : p.value.data) put_f32(os, static_cast<float>(v));
  }

  OptimizerState& opt = trainer.optimizer();
  for (int i = 0; i < ps.size(); ++i) {
    for (double v : opt.sq_avg[static_cast<std::size_t>(i)].data) put_f64(os, v);
    for (double v : opt.velocity[static_cast<std::size_t>(i)].data)
      put_f64(os, v);
  }

  put_u64(os, static_cast<std::uint64_t>(trainer.batch_index()));
  put_u64(os, static_cast<std::uint64_t>(trainer.env_steps()));
  put_u64(os, static_cast<std::uint64_t>(trainer.sessions()));

  for (int t = 0; t < kTaskCount; ++t) {
    const auto& w = trainer.trailing_window(t);
    put_u32(os, static_cast<std::uint32_t>(w.size()));
    for (bool b : w) os.put(b ? 1 : 0);
  }

  put_u32(os, static_cast<std::uint32_t>(trainer.worker_count()));
  for (int i = 0; i < trainer.worker_count(); ++i) {
    Worker& w = trainer.worker(i);
    put_str(os, w.rng().save_state());
    put_u32(os, static_cast<std::uint32_t>(w.curriculum().level));
    put_u32(os, static_cast<std::uint32_t>(w.curriculum().window.size()));
    for (const auto& [task, success] : w.curriculum().window) {
      os.put(static_cast<char>(static_cast<int>(task)));
      os.put(success ? 1 : 0);
    }
  }
  check(os.good(), "checkpoint: write failed for '" + path + "'");
  os.close();

  // sessions restart after a save in the live run too, so a resumed run and
  // the uninterrupted run share identical state from this barrier onward
  trainer.reset_all_sessions();
}

void load_checkpoint(const std::string& path, Trainer& trainer) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "checkpoint: cannot open '" + path + "'");
  read_header(is);
  read_params(is, trainer.params());

  ParameterSet& ps = trainer.params();
  OptimizerState& opt = trainer.optimizer();
  for (int i = 0; i < ps.size(); ++i) {
    for (double& v : opt.sq_avg[static_cast<std::size_t>(i)].data)
      v = get_f64(is);
    for (double& v : opt.velocity[static_cast<std::size_t>(i)].data)
      v = get_f64(is);
  }

  const long batch = static_cast<long>(get_u64(is));
  const long steps = static_cast<long>(get_u64(is));
  const long sessions = static_cast<long>(get_u64(is));
  trainer.restore_counters(batch, steps, sessions);

  for (int t = 0; t < kTaskCount; ++t) {
    auto& w = trainer.trailing_window(t);
    w.clear();
    const std::uint32_t n = get_u32(is);
    for (std::uint32_t i = 0; i < n; ++i) {
      char b;
      is.get(b);
      w.push_back(b != 0);
    }
  }

  const std::uint32_t n_workers = get_u32(is);
  check(static_cast<int>(n_workers) == trainer.worker_count(),
        "checkpoint: worker count mismatch");
  for (int i = 0; i < trainer.worker_count(); ++i) {
    Worker& w = trainer.worker(i);
    w.rng().load_state(get_str(is));
    w.curriculum().level = static_cast<int>(get_u32(is));
    w.curriculum().window.clear();
    const std::uint32_t n = get_u32(is);
    for (std::uint32_t k = 0; k < n; ++k) {
      char task, success;
      is.get(task);
      is.get(success);
      w.curriculum().window.push_back(
          {static_cast<TaskType>(task), success != 0});
    }
    w.abandon_session();
  }
  check(is.good(), "checkpoint: truncated file");
}

void load_params(const std::string& path, ParameterSet& ps) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "checkpoint: cannot open '" + path + "'");
  read_header(is);
  read_params(is, ps);
}

}  // namespace xgft
