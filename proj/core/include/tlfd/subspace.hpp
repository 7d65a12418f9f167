#pragma once

#include <Eigen/Dense>

namespace tlfd {

/// Relative singular-value cutoff for all rank / null-space decisions.
inline constexpr double kRankRelTol = 1e-8;

/// Subspace of R^n held as an orthonormal basis (n x k, k may be 0).
struct Subspace {
    Eigen::MatrixXd basis;

    int dim() const { return static_cast<int>(basis.cols()); }
    int ambient() const { return static_cast<int>(basis.rows()); }

    /// Orthogonality defect ||B^T B - I||.
    double orthonormality_defect() const;
    /// Distance of v from the subspace, relative to ||v||.
    double distance(const Eigen::VectorXd& v) const;
    /// True when every column of `other` lies within `tol` of this subspace.
    bool contains(const Eigen::MatrixXd& other, double tol = 1e-10) const;
};

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankRelTol);

/// Orthonormal basis of the column space (SVD-based).
Subspace column_space(const Eigen::MatrixXd& m, double rel_tol = kRankRelTol);

/// Orthonormal basis of the (right) null space.
Subspace null_space(const Eigen::MatrixXd& m, double rel_tol = kRankRelTol);

/// Intersection of two subspaces given by orthonormal bases.
Subspace intersect(const Subspace& a, const Subspace& b, double rel_tol = kRankRelTol);

} // namespace tlfd
