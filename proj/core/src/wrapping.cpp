#include "prmi/wrapping.hpp"

#include <cmath>

#include "prmi/dynamics.hpp"

namespace prmi::wrapping {

ZCoords to_z(double dl_prcl, double dl_mich) {
  return {2.0 * dl_prcl + dl_mich, 2.0 * dl_prcl - dl_mich};
}

DofPosition from_z(const ZCoords& z) { return {(z.z1 + z.z2) / 4.0, (z.z1 - z.z2) / 2.0}; }

DofPosition shift_by_grid(const DofPosition& p, int n1, int n2, double lambda) {
  const double half = lambda / 2.0;
  const ZCoords z = to_z(p);
  return from_z({z.z1 + n1 * half, z.z2 + n2 * half});
}

WrapResult wrap(double dl_prcl, double dl_mich, double lambda) {
  const double half = lambda / 2.0;
  const double quarter = lambda / 4.0;
  const ZCoords z = to_z(dl_prcl, dl_mich);
  WrapResult r;
  r.n1 = static_cast<int>(std::floor((z.z1 + quarter) / half));
  r.n2 = static_cast<int>(std::floor((z.z2 + quarter) / half));
  r.wrapped = from_z({z.z1 - r.n1 * half, z.z2 - r.n2 * half});
  return r;
}

DofPosition unwrap(const WrapResult& w, double lambda) {
  return shift_by_grid(w.wrapped, w.n1, w.n2, lambda);
}

std::vector<WrapResult> wrap_trajectory(const dynamics::Trajectory& traj, double lambda) {
  std::vector<WrapResult> out;
  out.reserve(traj.states.size());
  for (const auto& s : traj.states) out.push_back(wrap(s.dl_prcl, s.dl_mich, lambda));
  return out;
}

}  // namespace prmi::wrapping
