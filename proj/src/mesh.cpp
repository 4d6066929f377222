#include "psim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "psim/errors.hpp"

namespace psim {

double Mesh::spacing(Region r) const {
  const int k = static_cast<int>(r);
  return (breakpoints[k + 1] - breakpoints[k]) / (nodes_per_region - 1);
}

double Mesh::region_measure(Region r) const {
  double m = 0.0;
  for (const auto& c : cells)
    if (c.region == r) m += c.measure;
  return m;
}

int nodes_for_level(int nstar) { return 2 * (1 << (nstar - 1)) + 1; }

Mesh build_three_layer_mesh(const std::array<double, 4>& bp, int n) {
  for (int i = 0; i < 3; ++i)
    if (!(bp[i] < bp[i + 1])) throw ConfigError("mesh breakpoints must be strictly increasing");
  if (n < 2) throw ConfigError("nodes_per_region must be at least 2");

  Mesh mesh;
  mesh.breakpoints = bp;
  mesh.nodes_per_region = n;
  const Region regions[3] = {Region::HTL, Region::Intrinsic, Region::ETL};
  for (int r = 0; r < 3; ++r) {
    const double a = bp[r], b = bp[r + 1];
    const double h = (b - a) / (n - 1);
    for (int i = 0; i < n; ++i) {
      Cell c;
      c.index = static_cast<int>(mesh.cells.size());
      c.node = i == n - 1 ? b : a + i * h;
      c.left = i == 0 ? a : c.node - 0.5 * h;
      c.right = i == n - 1 ? b : c.node + 0.5 * h;
      c.center = 0.5 * (c.left + c.right);
      c.measure = c.right - c.left;
      c.region = regions[r];
      mesh.cells.push_back(c);
    }
  }

  const int nc = mesh.num_cells();
  mesh.faces_of_cell.assign(nc, {});
  auto add_face = [&](Face f) {
    f.index = static_cast<int>(mesh.faces.size());
    f.transmissibility = f.measure / f.distance;
    mesh.faces_of_cell[f.cell_k].push_back(f.index);
    if (f.cell_l >= 0) mesh.faces_of_cell[f.cell_l].push_back(f.index);
    if (f.kind == FaceKind::DirichletBoundary) mesh.dirichlet_faces.push_back(f.index);
    mesh.faces.push_back(f);
  };

  Face left;
  left.kind = FaceKind::DirichletBoundary;
  left.cell_k = 0;
  left.position = bp[0];
  left.dist_k = mesh.cells[0].center - bp[0];
  left.distance = left.dist_k;
  left.dirichlet_slot = 0;
  add_face(left);
  for (int k = 0; k + 1 < nc; ++k) {
    const Cell& ck = mesh.cells[k];
    const Cell& cl = mesh.cells[k + 1];
    Face f;
    f.kind = FaceKind::Interior;
    f.cell_k = k;
    f.cell_l = k + 1;
    f.position = ck.right;
    f.dist_k = ck.right - ck.center;
    f.dist_l = cl.center - cl.left;
    f.distance = cl.center - ck.center;
    f.in_intrinsic_interior = ck.region == Region::Intrinsic && cl.region == Region::Intrinsic;
    add_face(f);
  }
  Face right;
  right.kind = FaceKind::DirichletBoundary;
  right.cell_k = nc - 1;
  right.position = bp[3];
  right.dist_k = bp[3] - mesh.cells[nc - 1].center;
  right.distance = right.dist_k;
  right.dirichlet_slot = 1;
  add_face(right);

  mesh.intrinsic_index.assign(nc, -1);
  for (const auto& c : mesh.cells) {
    if (c.region == Region::Intrinsic) {
      mesh.intrinsic_index[c.index] = mesh.num_intrinsic();
      mesh.intrinsic_cells.push_back(c.index);
    }
  }

  double xi = std::numeric_limits<double>::infinity();
  for (const auto& c : mesh.cells) {
    double sum = 0.0;
    for (int fi : mesh.faces_of_cell[c.index]) {
      const Face& f = mesh.faces[fi];
      xi = std::min(xi, f.distance / c.measure);
      sum += f.measure * f.distance;
    }
    xi = std::min(xi, c.measure / sum);
  }
  mesh.regularity = xi;
  return mesh;
}

namespace {

void check_nested(const Mesh& fine, const Mesh& coarse) {
  const double tol = 1e-12 * fine.length();
  for (int i = 0; i < 4; ++i)
    if (std::abs(fine.breakpoints[i] - coarse.breakpoints[i]) > tol)
      throw MeshError("meshes have different breakpoints");
  for (const auto& c : coarse.cells) {
    bool found = false;
    for (const auto& f : fine.cells) {
      if (f.region == c.region && std::abs(f.node - c.node) <= tol) {
        found = true;
        break;
      }
    }
    if (!found) throw MeshError("coarse node is not a fine node; meshes are not nested");
  }
}

// Fine value at the coarse cell center, interpolated within the coarse cell's region.
double sample(const Mesh& fine, const std::vector<int>& region_cells, const std::vector<double>& v,
              const std::vector<int>& value_index, double x) {
  const double tol = 1e-12 * fine.length();
  auto it = std::lower_bound(region_cells.begin(), region_cells.end(), x,
                             [&](int k, double pos) { return fine.cells[k].center < pos - tol; });
  if (it != region_cells.end() && std::abs(fine.cells[*it].center - x) <= tol)
    return v[value_index[*it]];
  if (it == region_cells.begin()) return v[value_index[*it]];
  if (it == region_cells.end()) return v[value_index[region_cells.back()]];
  const int kr = *it;
  const int kl = *(it - 1);
  const double xl = fine.cells[kl].center, xr = fine.cells[kr].center;
  const double w = (x - xl) / (xr - xl);
  return (1.0 - w) * v[value_index[kl]] + w * v[value_index[kr]];
}

std::vector<double> project_impl(const Mesh& fine, const Mesh& coarse, const std::vector<double>& v,
                                 bool intrinsic_only) {
  check_nested(fine, coarse);
  std::vector<int> value_index(fine.num_cells());
  for (int k = 0; k < fine.num_cells(); ++k)
    value_index[k] = intrinsic_only ? fine.intrinsic_index[k] : k;
  const size_t expected = intrinsic_only ? fine.intrinsic_cells.size() : fine.cells.size();
  if (v.size() != expected) throw MeshMismatch("field size does not match the fine mesh");

  std::array<std::vector<int>, 3> by_region;
  for (const auto& c : fine.cells) by_region[static_cast<int>(c.region)].push_back(c.index);

  std::vector<double> out;
  for (const auto& c : coarse.cells) {
    if (intrinsic_only && c.region != Region::Intrinsic) continue;
    out.push_back(sample(fine, by_region[static_cast<int>(c.region)], v, value_index, c.center));
  }
  return out;
}

}  // namespace

std::vector<double> project_to_coarser(const Mesh& fine, const Mesh& coarse,
                                       const std::vector<double>& values_on_fine) {
  return project_impl(fine, coarse, values_on_fine, false);
}

std::vector<double> project_intrinsic_to_coarser(const Mesh& fine, const Mesh& coarse,
                                                 const std::vector<double>& values_on_fine) {
  return project_impl(fine, coarse, values_on_fine, true);
}

}  // namespace psim
