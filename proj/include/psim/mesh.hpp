#pragma once

#include <array>
#include <vector>

namespace psim {

enum class Region { HTL = 0, Intrinsic = 1, ETL = 2 };

struct Cell {
  int index = 0;
  double center = 0.0;
  double measure = 0.0;  // m_K
  double node = 0.0;     // collocation point the cell was built around
  double left = 0.0;
  double right = 0.0;
  Region region = Region::HTL;
};

enum class FaceKind { Interior, DirichletBoundary, NeumannBoundary };

struct Face {
  int index = 0;
  FaceKind kind = FaceKind::Interior;
  int cell_k = -1;
  int cell_l = -1;  // -1 on boundary faces
  double position = 0.0;
  double measure = 1.0;  // m_sigma, 1 in 1D
  double distance = 0.0;  // d_sigma
  double transmissibility = 0.0;  // tau_sigma = m_sigma / d_sigma
  double dist_k = 0.0;  // center of K to the face
  double dist_l = 0.0;
  bool in_intrinsic_interior = false;
  int dirichlet_slot = -1;  // 0 = left contact, 1 = right contact
};

struct Mesh {
  std::array<double, 4> breakpoints{};
  int nodes_per_region = 0;
  std::vector<Cell> cells;
  std::vector<Face> faces;
  std::vector<std::vector<int>> faces_of_cell;
  std::vector<int> dirichlet_faces;
  std::vector<int> intrinsic_index;  // cell -> position in intrinsic numbering, or -1
  std::vector<int> intrinsic_cells;
  double regularity = 0.0;

  int num_cells() const { return static_cast<int>(cells.size()); }
  int num_intrinsic() const { return static_cast<int>(intrinsic_cells.size()); }
  double length() const { return breakpoints[3] - breakpoints[0]; }
  double spacing(Region r) const;
  double region_measure(Region r) const;
};

Mesh build_three_layer_mesh(const std::array<double, 4>& breakpoints, int nodes_per_region);

/// Nodes per region for refinement level n*.
int nodes_for_level(int nstar);

/// Values of a fine-mesh field at the collocation cells of a nested coarser mesh.
std::vector<double> project_to_coarser(const Mesh& fine, const Mesh& coarse,
                                       const std::vector<double>& values_on_fine);

/// Same for fields living on intrinsic cells only.
std::vector<double> project_intrinsic_to_coarser(const Mesh& fine, const Mesh& coarse,
                                                 const std::vector<double>& values_on_fine);

}  // namespace psim
