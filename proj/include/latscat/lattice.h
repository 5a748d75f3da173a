#pragma once

#include <vector>

#include "latscat/common.h"

namespace latscat {

// Exact integer lattice geometry for finite point sets. All predicates are
// computed in exact arithmetic (int128-backed rationals), no floating point.
namespace lattice {

long long gcd_ll(long long a, long long b);
bool is_prime_vector(const IVec& a);  // components coprime, a != 0

// Integer matrix with |det| = 1 whose first column is the prime vector a.
// Returned row-major d x d.
std::vector<long long> complete_to_unimodular(const IVec& a);
long long det_int(const std::vector<long long>& m, int d);

// Membership of p in the convex hull of X, exact.
bool in_hull(const std::vector<IVec>& X, const IVec& p);

// Conv(X) intersected with Z^d (enumerated over the bounding box).
std::vector<IVec> lattice_hull(const std::vector<IVec>& X);

// {x in X : x + s in X for every s in S}.
std::vector<IVec> s_interior(const std::vector<IVec>& X, const std::vector<IVec>& S);

// Inward halfspace {x : a.x >= m} touching X: m = min_{x in X} a.x.
struct HalfSpace {
  IVec a;
  long long m = 0;
};

// Facet halfspaces of Conv(X) with inward orientation, primitive normals.
// When the hull is not full-dimensional, spanning hyperplanes are reported in
// both orientations.
std::vector<HalfSpace> contact_halfspaces(const std::vector<IVec>& X);

// Iterates X_{j+1} = s_interior(lattice_hull(X_j)) until empty or stationary.
// Reaching the empty set certifies that no nonzero vector supported in X_0 can
// satisfy the support-shrinking relation, which is the combinatorial core of
// the no-embedded-eigenvalue certificate for fully supported diagonal
// potentials.
struct ShrinkChain {
  std::vector<std::vector<IVec>> stages;
  bool empty_terminated = false;
};
ShrinkChain shrink_chain(const std::vector<IVec>& X0, const std::vector<IVec>& S,
                         int max_stages = 64);

}  // namespace lattice
}  // namespace latscat
