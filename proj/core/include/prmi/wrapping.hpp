#pragma once

#include <vector>

namespace prmi::dynamics {
struct Trajectory;
}

namespace prmi::wrapping {

/// Combinations in which every optical signal is independently periodic with
/// period lambda/2: z1 = 2 dl_prcl + dl_mich, z2 = 2 dl_prcl - dl_mich.
struct ZCoords {
  double z1 = 0.0;
  double z2 = 0.0;
};

struct DofPosition {
  double dl_prcl = 0.0;
  double dl_mich = 0.0;
};

/// Position reduced into the half-open Z cell [-lambda/4, lambda/4)^2 and the
/// number of half-wavelengths that were subtracted on each Z axis.
struct WrapResult {
  DofPosition wrapped;
  int n1 = 0;
  int n2 = 0;
};

ZCoords to_z(double dl_prcl, double dl_mich);
inline ZCoords to_z(const DofPosition& p) { return to_z(p.dl_prcl, p.dl_mich); }
DofPosition from_z(const ZCoords& z);

/// Adds (n1, n2) half-wavelengths in Z space and maps back.
DofPosition shift_by_grid(const DofPosition& p, int n1, int n2, double lambda);

WrapResult wrap(double dl_prcl, double dl_mich, double lambda);

/// Inverse of wrap given the recorded shifts.
DofPosition unwrap(const WrapResult& w, double lambda);

std::vector<WrapResult> wrap_trajectory(const dynamics::Trajectory& traj, double lambda);

}  // namespace prmi::wrapping
