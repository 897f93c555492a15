#include <algorithm>

#include "tumornet/nn/detail.hpp"
#include "tumornet/nn/ops.hpp"

namespace tumornet::nn {

namespace {

struct ConvGeometry {
  int cin, k, stride, pad;
  int n[3];
  int o[3];
  std::int64_t in_plane() const { return static_cast<std::int64_t>(n[0]) * n[1] * n[2]; }
  std::int64_t out_plane() const { return static_cast<std::int64_t>(o[0]) * o[1] * o[2]; }
  std::int64_t rows() const { return static_cast<std::int64_t>(cin) * k * k * k; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

// Output positions along one axis whose input coordinate o*s - p + kk falls
// inside [0, n).
inline void valid_range(int n, int o, int s, int p, int kk, int& lo, int& hi) {
  lo = 0;
  while (lo < o && lo * s - p + kk < 0) ++lo;
  hi = o;
  while (hi > lo && (hi - 1) * s - p + kk >= n) --hi;
}

// Unrolls output planes [za, zb) of one sample into a (cin*k^3) x
// ((zb-za)*o1*o2) row-major matrix, or scatters such a matrix back (adding)
// when Scatter is set.
template <bool Scatter, typename T>
void im2col(const ConvGeometry& g, int za, int zb, std::conditional_t<Scatter, T*, const T*> x,
            std::conditional_t<Scatter, const T*, T*> col) {
  const int k = g.k, s = g.stride, p = g.pad;
  const std::int64_t P = static_cast<std::int64_t>(zb - za) * g.o[1] * g.o[2];
  for (int c = 0; c < g.cin; ++c) {
    const auto xc = x + c * g.in_plane();
    for (int kz = 0; kz < k; ++kz)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const std::int64_t row = ((static_cast<std::int64_t>(c) * k + kz) * k + ky) * k + kx;
          auto cr = col + row * P;
          int z0, z1, y0, y1, x0, x1;
          valid_range(g.n[0], g.o[0], s, p, kz, z0, z1);
          z0 = std::max(z0, za);
          z1 = std::min(z1, zb);
          valid_range(g.n[1], g.o[1], s, p, ky, y0, y1);
          valid_range(g.n[2], g.o[2], s, p, kx, x0, x1);
          const std::int64_t plane = static_cast<std::int64_t>(g.o[1]) * g.o[2];
          if constexpr (!Scatter) {
            // Zero only the padding border; the interior is overwritten below.
            if (z0 >= z1 || y0 >= y1 || x0 >= x1) {
              std::fill(cr, cr + P, T(0));
              continue;
            }
            std::fill(cr, cr + (z0 - za) * plane, T(0));
            std::fill(cr + (z1 - za) * plane, cr + P, T(0));
            for (int oz = z0; oz < z1; ++oz) {
              const auto cp = cr + (oz - za) * plane;
              std::fill(cp, cp + static_cast<std::int64_t>(y0) * g.o[2], T(0));
              std::fill(cp + static_cast<std::int64_t>(y1) * g.o[2], cp + plane, T(0));
              for (int oy = y0; oy < y1; ++oy) {
                std::fill(cp + oy * g.o[2], cp + oy * g.o[2] + x0, T(0));
                std::fill(cp + oy * g.o[2] + x1, cp + (oy + 1) * g.o[2], T(0));
              }
            }
          }
          for (int oz = z0; oz < z1; ++oz) {
            const int iz = oz * s - p + kz;
            for (int oy = y0; oy < y1; ++oy) {
              const int iy = oy * s - p + ky;
              const auto xr = xc + (static_cast<std::int64_t>(iz) * g.n[1] + iy) * g.n[2] - p + kx;
              const auto crow = cr + (oz - za) * plane + static_cast<std::int64_t>(oy) * g.o[2];
              if constexpr (Scatter) {
                if (s == 1) {
                  for (int ox = x0; ox < x1; ++ox) xr[ox] += crow[ox];
                } else {
                  for (int ox = x0; ox < x1; ++ox) xr[ox * s] += crow[ox];
                }
              } else if (s == 1) {
                std::copy(xr + x0, xr + x1, crow + x0);
              } else {
                for (int ox = x0; ox < x1; ++ox) crow[ox] = xr[ox * s];
              }
            }
          }
        }
  }
}

// Output planes per im2col tile, sized so the column block stays cache resident.
inline int slab_planes(const ConvGeometry& g) {
  const std::int64_t per_plane = g.rows() * g.o[1] * g.o[2];
  return static_cast<int>(std::clamp<std::int64_t>((std::int64_t{1} << 17) / std::max<std::int64_t>(per_plane, 1), 1, g.o[0]));
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int stride, int padding) {
  using detail::ConstMatMap;
  using detail::MatMap;
  if (x.rank() != 5 || w.rank() != 5 || x.dim(1) != w.dim(1) || w.dim(2) != w.dim(3) || w.dim(3) != w.dim(4) ||
      (b && b->numel() != w.dim(0))) {
    throw Error(ErrorCode::shape_mismatch, "conv3d: input " + shape_string(x.shape()) + ", weight " +
                                               shape_string(w.shape()) +
                                               (b ? ", bias " + shape_string(b->shape()) : std::string()));
  }
  if (stride < 1 || padding < 0) throw Error(ErrorCode::invalid_argument, "conv3d: stride must be >= 1, padding >= 0");
  ConvGeometry g{x.dim(1), w.dim(2), stride, padding, {x.dim(2), x.dim(3), x.dim(4)}, {}};
  for (int a = 0; a < 3; ++a) {
    if (g.n[a] + 2 * padding < g.k) {
      throw Error(ErrorCode::shape_mismatch, "conv3d: kernel " + std::to_string(g.k) + " larger than padded input " +
                                                 shape_string(x.shape()));
    }
    g.o[a] = (g.n[a] + 2 * padding - g.k) / stride + 1;
  }
  const int B = x.dim(0), Cout = w.dim(0);
  const std::int64_t K = g.rows(), P = g.out_plane();
  Tensor<T> out(Shape{B, Cout, g.o[0], g.o[1], g.o[2]});
  ConstMatMap<T> W(w.data(), Cout, K);
  const int tz = slab_planes(g);
  const std::int64_t plane = static_cast<std::int64_t>(g.o[1]) * g.o[2];
  std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(K * tz * plane));
  using Stride = Eigen::OuterStride<>;
  for (int bi = 0; bi < B; ++bi) {
    const T* xb = x.data() + bi * g.cin * g.in_plane();
    MatMap<T> Y(out.data() + bi * Cout * P, Cout, P);
    if (g.pointwise()) {
      Y.noalias() = W * ConstMatMap<T>(xb, K, P);
    } else {
      for (int za = 0; za < g.o[0]; za += tz) {
        const int zb = std::min(za + tz, g.o[0]);
        const std::int64_t n = (zb - za) * plane;
        im2col<false, T>(g, za, zb, xb, col.data());
        Eigen::Map<detail::MatR<T>, 0, Stride> Yt(Y.data() + za * plane, Cout, n, Stride(P));
        Yt.noalias() = W * ConstMatMap<T>(col.data(), K, n);
      }
    }
    if (b) Y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b->data(), Cout);
  }
  if (detail::make_output(out, {&x, &w, b})) {
    record<T>([xn = x.node(), wn = w.node(), bn = b ? b->node() : nullptr, on = out.node(), g, B, Cout, K, P, tz,
               plane] {
      if (on->grad.size() == 0) return;
      using Stride = Eigen::OuterStride<>;
      using ConstTile = Eigen::Map<const detail::MatR<T>, 0, Stride>;
      const std::size_t tile = g.pointwise() ? 0 : static_cast<std::size_t>(K * tz * plane);
      std::vector<T> col(wn->requires_grad ? tile : 0);
      std::vector<T> dcol(xn->requires_grad ? tile : 0);
      ConstMatMap<T> W(wn->value.data(), Cout, K);
      for (int bi = 0; bi < B; ++bi) {
        ConstMatMap<T> G(on->grad.data() + bi * Cout * P, Cout, P);
        if (bn && bn->requires_grad) {
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(bn->grad_buffer().data(), Cout) += G.rowwise().sum();
        }
        const T* xb = xn->value.data() + bi * g.cin * g.in_plane();
        T* gx = xn->requires_grad ? xn->grad_buffer().data() + bi * g.cin * g.in_plane() : nullptr;
        if (g.pointwise()) {
          if (wn->requires_grad) {
            MatMap<T>(wn->grad_buffer().data(), Cout, K).noalias() += G * ConstMatMap<T>(xb, K, P).transpose();
          }
          if (gx) MatMap<T>(gx, K, P).noalias() += W.transpose() * G;
          continue;
        }
        for (int za = 0; za < g.o[0]; za += tz) {
          const int zb = std::min(za + tz, g.o[0]);
          const std::int64_t n = (zb - za) * plane;
          ConstTile Gt(G.data() + za * plane, Cout, n, Stride(P));
          if (wn->requires_grad) {
            im2col<false, T>(g, za, zb, xb, col.data());
            MatMap<T>(wn->grad_buffer().data(), Cout, K).noalias() += Gt * ConstMatMap<T>(col.data(), K, n).transpose();
          }
          if (gx) {
            MatMap<T>(dcol.data(), K, n).noalias() = W.transpose() * Gt;
            im2col<true, T>(g, za, zb, gx, dcol.data());
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  if (x.rank() != 5) throw Error(ErrorCode::shape_mismatch, "upsample_nearest2x expects rank 5, got " + shape_string(x.shape()));
  const int n0 = x.dim(2), n1 = x.dim(3), n2 = x.dim(4);
  const std::int64_t planes = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  Tensor<T> out(Shape{x.dim(0), x.dim(1), 2 * n0, 2 * n1, 2 * n2});
  const std::int64_t in_plane = static_cast<std::int64_t>(n0) * n1 * n2, out_plane = 8 * in_plane;
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const T* src = x.data() + pl * in_plane;
    T* dst = out.data() + pl * out_plane;
    for (int z = 0; z < 2 * n0; ++z)
      for (int y = 0; y < 2 * n1; ++y) {
        const T* s = src + (static_cast<std::int64_t>(z / 2) * n1 + y / 2) * n2;
        T* d = dst + (static_cast<std::int64_t>(z) * 2 * n1 + y) * 2 * n2;
        for (int xx = 0; xx < 2 * n2; ++xx) d[xx] = s[xx / 2];
      }
  }
  if (detail::make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), planes, n0, n1, n2, in_plane, out_plane] {
      if (on->grad.size() == 0) return;
      T* gx = xn->grad_buffer().data();
      for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* g = on->grad.data() + pl * out_plane;
        T* d = gx + pl * in_plane;
        for (int z = 0; z < 2 * n0; ++z)
          for (int y = 0; y < 2 * n1; ++y) {
            const T* gr = g + (static_cast<std::int64_t>(z) * 2 * n1 + y) * 2 * n2;
            T* dr = d + (static_cast<std::int64_t>(z / 2) * n1 + y / 2) * n2;
            for (int xx = 0; xx < 2 * n2; ++xx) dr[xx / 2] += gr[xx];
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool2x(const Tensor<T>& x) {
  if (x.rank() != 5 || x.dim(2) % 2 || x.dim(3) % 2 || x.dim(4) % 2) {
    throw Error(ErrorCode::shape_mismatch, "avg_pool2x expects rank 5 with even spatial extents, got " + shape_string(x.shape()));
  }
  const int m0 = x.dim(2) / 2, m1 = x.dim(3) / 2, m2 = x.dim(4) / 2;
  const std::int64_t planes = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  const std::int64_t out_plane = static_cast<std::int64_t>(m0) * m1 * m2, in_plane = 8 * out_plane;
  Tensor<T> out(Shape{x.dim(0), x.dim(1), m0, m1, m2});
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const T* src = x.data() + pl * in_plane;
    T* dst = out.data() + pl * out_plane;
    for (int z = 0; z < 2 * m0; ++z)
      for (int y = 0; y < 2 * m1; ++y) {
        const T* s = src + (static_cast<std::int64_t>(z) * 2 * m1 + y) * 2 * m2;
        T* d = dst + (static_cast<std::int64_t>(z / 2) * m1 + y / 2) * m2;
        for (int xx = 0; xx < 2 * m2; ++xx) d[xx / 2] += s[xx] * T(0.125);
      }
  }
  if (detail::make_output(out, {&x})) {
    record<T>([xn = x.node(), on = out.node(), planes, m0, m1, m2, in_plane, out_plane] {
      if (on->grad.size() == 0) return;
      T* gx = xn->grad_buffer().data();
      for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* g = on->grad.data() + pl * out_plane;
        T* d = gx + pl * in_plane;
        for (int z = 0; z < 2 * m0; ++z)
          for (int y = 0; y < 2 * m1; ++y) {
            const T* gr = g + (static_cast<std::int64_t>(z / 2) * m1 + y / 2) * m2;
            T* dr = d + (static_cast<std::int64_t>(z) * 2 * m1 + y) * 2 * m2;
            for (int xx = 0; xx < 2 * m2; ++xx) dr[xx] += gr[xx / 2] * T(0.125);
          }
      }
    });
  }
  return out;
}

template Tensor<float> conv3d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>*, int, int);
template Tensor<double> conv3d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>*, int, int);
template Tensor<float> upsample_nearest2x(const Tensor<float>&);
template Tensor<double> upsample_nearest2x(const Tensor<double>&);
template Tensor<float> avg_pool2x(const Tensor<float>&);
template Tensor<double> avg_pool2x(const Tensor<double>&);

}  // namespace tumornet::nn
