#pragma once

#include <vector>

#include "frk/laplace.hpp"

namespace frk::detail {

// Fixed-pattern assembly of the lower triangle of -d2 l / du du. The data block
// is G^T W G + B^T D B with G = C diag(dmu) B and B = [S I]; every product
// entry is precomputed as a list of index terms so each Newton step only
// accumulates numbers.
struct HessianPlan {
  struct GTerm {
    int g, a;
    double c;  // C_ja * B_ak
  };
  struct WTerm {
    int h, g1, g2, j;
  };
  struct DTerm {
    int h, a;
    double c;  // B_ak * B_al
  };
  SpMat pattern;  // lower triangle, zero values
  int n_g = 0;
  std::vector<GTerm> g_terms;
  std::vector<WTerm> w_terms;
  std::vector<DTerm> d_terms;
  std::vector<int> xi_diag;
  // positions of a representative prior precision, reused when the structure matches
  std::vector<int> q_outer, q_inner, q_pos;

  // Storage position of (row, col) with row >= col, or -1.
  int find(int row, int col) const;
};

}  // namespace frk::detail
