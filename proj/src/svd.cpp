#include "xgft/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xgft {

namespace {

inline double col_dot(const Tensor& m, int p, int q) {
  const int d = m.rows();
  double s = 0;
  for (int i = 0; i < d; ++i) s += m.at(i, p) * m.at(i, q);
  return s;
}

inline void rotate_cols(Tensor& m, int p, int q, double c, double s) {
  const int d = m.rows();
  for (int i = 0; i < d; ++i) {
    const double mp = m.at(i, p), mq = m.at(i, q);
    m.at(i, p) = c * mp - s * mq;
    m.at(i, q) = s * mp + c * mq;
  }
}

}  // namespace

SvdResult svd_decompose(const Tensor& a) {
  check(a.ndim() == 2 && a.rows() == a.cols(), "svd: expects a square matrix");
  check(a.all_finite(), "svd: non-finite input");
  const int d = a.rows();

  Tensor w = a;  // columns orthogonalized in place
  Tensor v = Tensor::zeros({d, d});
  for (int i = 0; i < d; ++i) v.at(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data) scale = std::max(scale, std::fabs(x));
  const double tol = 1e-15;

  if (scale > 0.0) {
    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      bool rotated = false;
      for (int p = 0; p < d - 1; ++p)
        for (int q = p + 1; q < d; ++q) {
          const double app = col_dot(w, p, p);
          const double aqq = col_dot(w, q, q);
          const double apq = col_dot(w, p, q);
          if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
          rotated = true;
          const double zeta = (aqq - app) / (2.0 * apq);
          const double t = (zeta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = c * t;
          rotate_cols(w, p, q, c, s);
          rotate_cols(v, p, q, c, s);
        }
      if (!rotated) break;
    }
  }

  SvdResult r;
  r.sigma.assign(static_cast<std::size_t>(d), 0.0);
  r.u = Tensor::zeros({d, d});
  r.v = Tensor::zeros({d, d});

  std::vector<double> norms(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j)
    norms[static_cast<std::size_t>(j)] = std::sqrt(col_dot(w, j, j));
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
  });

  const double rank_tol = scale * static_cast<double>(d) * 1e-14;
  int rank = 0;
  for (int k = 0; k < d; ++k) {
    const int j = order[static_cast<std::size_t>(k)];
    const double nj = norms[static_cast<std::size_t>(j)];
    r.sigma[static_cast<std::size_t>(k)] = nj;
    for (int i = 0; i < d; ++i) r.v.at(i, k) = v.at(i, j);
    if (nj > rank_tol) {
      for (int i = 0; i < d; ++i) r.u.at(i, k) = w.at(i, j) / nj;
      ++rank;
    }
  }

  // Complete U for (near-)null columns by Gram-Schmidt over the standard
  // basis; keeps U orthogonal for rank-deficient inputs.
  for (int k = rank; k < d; ++k) {
    r.sigma[static_cast<std::size_t>(k)] = 0.0;
    for (int cand = 0; cand < d; ++cand) {
      std::vector<double> col(static_cast<std::size_t>(d), 0.0);
      col[static_cast<std::size_t>(cand)] = 1.0;
      for (int j = 0; j < k; ++j) {
        double dot = 0;
        for (int i = 0; i < d; ++i) dot += r.u.at(i, j) * col[static_cast<std::size_t>(i)];
        for (int i = 0; i < d; ++i) col[static_cast<std::size_t>(i)] -= dot * r.u.at(i, j);
      }
      double nrm = 0;
      for (double x : col) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 1e-6) {
        for (int i = 0; i < d; ++i) r.u.at(i, k) = col[static_cast<std::size_t>(i)] / nrm;
        break;
      }
    }
  }

  // Fix signs: largest-|entry| of each U column non-negative.
  for (int k = 0; k < d; ++k) {
    int arg = 0;
    double best = 0;
    for (int i = 0; i < d; ++i) {
      const double m = std::fabs(r.u.at(i, k));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    if (r.u.at(arg, k) < 0) {
      for (int i = 0; i < d; ++i) {
        r.u.at(i, k) = -r.u.at(i, k);
        r.v.at(i, k) = -r.v.at(i, k);
      }
    }
  }
  return r;
}

double svd_reconstruction_error(const SvdResult& r, const Tensor& a) {
  const int d = a.rows();
  double err = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0;
      for (int k = 0; k < d; ++k)
        s += r.u.at(i, k) * r.sigma[static_cast<std::size_t>(k)] * r.v.at(j, k);
      const double dlt = s - a.at(i, j);
      err += dlt * dlt;
    }
  return std::sqrt(err);
}

double orthogonality_defect(const Tensor& m) {
  const int d = m.rows();
  double worst = 0;
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) {
      double s = 0;
      for (int i = 0; i < d; ++i) s += m.at(i, p) * m.at(i, q);
      const double target = (p == q) ? 1.0 : 0.0;
      worst = std::max(worst, std::fabs(s - target));
    }
  return worst;
}

}  // namespace xgft
