#include "tlfd/subspace.hpp"

#include <Eigen/SVD>

namespace tlfd {

double Subspace::orthonormality_defect() const {
    if (dim() == 0) return 0.0;
    const Eigen::MatrixXd g = basis.transpose() * basis;
    return (g - Eigen::MatrixXd::Identity(dim(), dim())).norm();
}

double Subspace::distance(const Eigen::VectorXd& v) const {
    const double n = v.norm();
    if (n == 0.0) return 0.0;
    if (dim() == 0) return 1.0;
    const Eigen::VectorXd r = v - basis * (basis.transpose() * v);
    return r.norm() / n;
}

bool Subspace::contains(const Eigen::MatrixXd& other, double tol) const {
    for (Eigen::Index c = 0; c < other.cols(); ++c)
        if (distance(other.col(c)) > tol) return false;
    return true;
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double cut = rel_tol * sv(0);
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++r;
    return r;
}

Subspace column_space(const Eigen::MatrixXd& m, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int r = 0;
    if (sv.size() > 0 && sv(0) > 0.0) {
        const double cut = rel_tol * sv(0);
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > cut) ++r;
    }
    return Subspace{svd.matrixU().leftCols(r)};
}

Subspace null_space(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.rows() == 0)
        return Subspace{Eigen::MatrixXd::Identity(m.cols(), m.cols())};
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int r = 0;
    if (sv.size() > 0 && sv(0) > 0.0) {
        const double cut = rel_tol * sv(0);
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > cut) ++r;
    }
    return Subspace{svd.matrixV().rightCols(m.cols() - r)};
}

Subspace intersect(const Subspace& a, const Subspace& b, double rel_tol) {
    // null([a_perp^T; b_perp^T]) done through the stacked projector complement
    const Eigen::Index n = a.basis.rows();
    Eigen::MatrixXd stack(2 * n, n);
    stack.topRows(n) = Eigen::MatrixXd::Identity(n, n) - a.basis * a.basis.transpose();
    stack.bottomRows(n) = Eigen::MatrixXd::Identity(n, n) - b.basis * b.basis.transpose();
    return null_space(stack, rel_tol);
}

} // namespace tlfd
