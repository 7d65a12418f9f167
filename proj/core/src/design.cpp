#include "tlfd/design.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "tlfd/errors.hpp"

namespace tlfd {

namespace {

// Stacked M_d' rows for an event matrix F (single vector = one column).
// Every block row is scaled to unit norm and the closed-loop matrix is
// normalized once; both are row/column scalings that leave the null space
// untouched but keep the singular spectrum representable for models in
// physical units.
Eigen::MatrixXd stacked_detection_matrix(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& C,
                                         const Eigen::MatrixXd& F) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = C.rows();

    const Eigen::MatrixXd CF = C * F;
    const Eigen::MatrixXd gram = CF.transpose() * CF;
    Eigen::FullPivLU<Eigen::MatrixXd> gram_lu(gram);
    if (!gram_lu.isInvertible())
        throw DesignError("event vector unobservable: C F is rank deficient");

    const Eigen::MatrixXd proj = CF * gram_lu.solve(CF.transpose()); // m x m
    const Eigen::MatrixXd Df = A * F * gram_lu.solve(CF.transpose());
    const Eigen::MatrixXd Cp = (Eigen::MatrixXd::Identity(m, m) - proj) * C;

    Eigen::MatrixXd Acl = A - Df * C;
    const double scale = Acl.norm();
    if (scale > 1.0) Acl /= scale;

    Eigen::MatrixXd stack(n * m, n);
    Eigen::MatrixXd X = Cp;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double nrm = X.norm();
        if (nrm > 0.0) X /= nrm;
        stack.middleRows(k * m, m) = X;
        X = X * Acl;
    }
    return stack;
}

std::vector<double> broadcast8(const std::vector<double>& v) {
    if (v.size() == 8) return v;
    if (v.size() == 1) return std::vector<double>(8, v[0]);
    throw DesignError("expected 1 or 8 assigned eigenvalues, got " +
                      std::to_string(v.size()));
}

} // namespace

Subspace detection_space(const StateSpaceModel& model, const Eigen::VectorXd& f) {
    const Eigen::VectorXd Cf = model.C * f;
    if (Cf.norm() <= 1e-14 * std::max(1.0, f.norm()))
        throw DesignError("event vector unobservable: C f = 0");
    const Eigen::MatrixXd stack =
        stacked_detection_matrix(model.A, model.C, f);
    return null_space(stack);
}

int detection_observability_rank(const StateSpaceModel& model, const Eigen::VectorXd& f) {
    const Eigen::VectorXd Cf = model.C * f;
    if (Cf.norm() <= 1e-14 * std::max(1.0, f.norm()))
        throw DesignError("event vector unobservable: C f = 0");
    return numerical_rank(stacked_detection_matrix(model.A, model.C, f));
}

Eigen::VectorXd detection_generator(const StateSpaceModel& model,
                                    const Eigen::VectorXd& f,
                                    const Subspace& space,
                                    double tol) {
    const int v = space.dim();
    if (v < 1) throw DesignError("detection_generator: empty detection space");
    const Eigen::Index m = model.C.rows();

    // unknowns: coordinates of g in the space basis
    Eigen::MatrixXd lhs(m * v, v);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m * v);
    Eigen::MatrixXd Ak_basis = space.basis; // A^k * basis
    for (int k = 0; k < v; ++k) {
        lhs.middleRows(k * m, m) = model.C * Ak_basis;
        if (k + 1 < v) Ak_basis = model.A * Ak_basis;
    }
    rhs.tail(m) = model.C * f;

    const Eigen::VectorXd c =
        lhs.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
    const double res = (lhs * c - rhs).norm();
    const double ref = std::max(1.0, rhs.norm());
    if (res > tol * ref)
        throw DesignError("detection_generator: defining equations are degenerate "
                          "(residual " + std::to_string(res / ref) + ")");
    return space.basis * c;
}

Subspace multiple_detection_space(const StateSpaceModel& model, const Eigen::MatrixXd& F) {
    const Eigen::MatrixXd CF = model.C * F;
    if (numerical_rank(CF) < F.cols())
        throw DesignError("output-separability failure: C F has rank " +
                          std::to_string(numerical_rank(CF)) + " < " +
                          std::to_string(F.cols()));
    return null_space(stacked_detection_matrix(model.A, model.C, F));
}

SeparabilityReport check_output_separable(const StateSpaceModel& model,
                                          const Eigen::MatrixXd& F) {
    SeparabilityReport rep;
    rep.rank_F = numerical_rank(F);
    rep.rank_CF = numerical_rank(model.C * F);
    rep.separable = rep.rank_F == rep.rank_CF;
    return rep;
}

bool check_mutually_detectable(const std::vector<Subspace>& spaces, const Subspace& total) {
    int sum = 0;
    for (const auto& s : spaces) sum += s.dim();
    return sum == total.dim();
}

Subspace excess_subspace(const StateSpaceModel& model,
                         const Subspace& total,
                         const std::vector<Subspace>& spaces) {
    int sum = 0;
    Eigen::Index cols = 0;
    for (const auto& s : spaces) {
        sum += s.dim();
        cols += s.dim();
    }
    const int needed = total.dim() - sum;
    if (needed < 0)
        throw DesignError("excess_subspace: individual spaces exceed the joint space");

    const Eigen::Index n = model.A.rows();
    Eigen::MatrixXd assigned(n, cols);
    Eigen::Index at = 0;
    for (const auto& s : spaces) {
        assigned.middleCols(at, s.dim()) = s.basis;
        at += s.dim();
    }
    if (needed == 0) {
        if (numerical_rank(assigned) != total.dim())
            throw DesignError("excess_subspace: spaces do not span the joint space");
        return Subspace{Eigen::MatrixXd::Zero(n, 0)};
    }

    const Subspace candidates = intersect(total, null_space(model.C));
    if (candidates.dim() < needed)
        throw DesignError("design infeasibility: complement of dimension " +
                          std::to_string(needed) + " not available inside null(C)");

    // pick candidate columns that extend the assigned spaces to a direct sum
    Eigen::MatrixXd chosen(n, needed);
    int got = 0;
    Eigen::MatrixXd work = assigned;
    for (int c = 0; c < candidates.dim() && got < needed; ++c) {
        Eigen::MatrixXd trial(n, work.cols() + 1);
        trial << work, candidates.basis.col(c);
        if (numerical_rank(trial) == work.cols() + 1) {
            chosen.col(got++) = candidates.basis.col(c);
            work = trial;
        }
    }
    if (got < needed)
        throw DesignError("design infeasibility: null(C) candidates do not complete "
                          "the joint detection space");
    Subspace out = column_space(chosen);
    if (numerical_rank(work) != total.dim())
        throw DesignError("excess_subspace: direct-sum completion failed");
    return out;
}

Eigen::MatrixXd compute_feedback(const StateSpaceModel& model,
                                 const Eigen::MatrixXd& generators,
                                 const std::vector<double>& eigenvalues) {
    const Eigen::Index r = generators.cols();
    if (static_cast<Eigen::Index>(eigenvalues.size()) != r)
        throw DesignError("compute_feedback: need one eigenvalue per generator");

    Eigen::MatrixXd psi = model.A * generators;
    for (Eigen::Index i = 0; i < r; ++i)
        psi.col(i) -= eigenvalues[static_cast<size_t>(i)] * generators.col(i);

    const Eigen::MatrixXd CG = model.C * generators;
    if (CG.rows() == r) {
        // D CG = psi  =>  CG^T D^T = psi^T
        Eigen::FullPivLU<Eigen::MatrixXd> lu(CG.transpose());
        if (!lu.isInvertible())
            throw DesignError("compute_feedback: [C g_1 ... C g_" + std::to_string(r) +
                              "] is singular (dependent generator set)");
        return lu.solve(psi.transpose()).transpose();
    }
    if (numerical_rank(CG) < r)
        throw DesignError("compute_feedback: C * generators is rank deficient "
                          "(dependent generator set)");
    return psi * (CG.transpose() * CG).ldlt().solve(CG.transpose());
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> canonical_transform(
    const StateSpaceModel& model,
    const Eigen::MatrixXd& generators,
    const Eigen::MatrixXd& excess_basis) {
    const Eigen::Index n = model.A.rows();
    const Eigen::Index r = generators.cols();
    if (r + excess_basis.cols() != n)
        throw DesignError("canonical_transform: generators + excess basis must fill "
                          "the state space");

    Eigen::MatrixXd T(n, n);
    T << generators, excess_basis;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(T);
    if (!lu.isInvertible())
        throw DesignError("canonical_transform: generator/excess columns are "
                          "linearly dependent");

    const Eigen::MatrixXd CG = model.C * generators;
    Eigen::FullPivLU<Eigen::MatrixXd> cg_lu(CG);
    if (CG.rows() != CG.cols() || !cg_lu.isInvertible())
        throw DesignError("canonical_transform: [C g_i] is not invertible");
    return {T, CG};
}

Mat12 FilterDesign::closed_loop_discrete() const {
    const Mat12 M = model.A - D * model.C;
    const Mat12 P = Mat12::Identity() - 0.5 * dt * M;
    const Mat12 Q = Mat12::Identity() + 0.5 * dt * M;
    return P.partialPivLu().solve(Q);
}

FilterDesign synthesize_filter(const LineParameters& params,
                               double dt,
                               const std::vector<double>& lambda_discrete,
                               double threshold_pu,
                               double magnitude_gain) {
    if (!(dt > 0.0)) throw DesignError("synthesize_filter: dt must be positive");
    const std::vector<double> lam = broadcast8(lambda_discrete);
    for (double l : lam)
        if (!(std::abs(l) < 1.0))
            throw DesignError("assigned eigenvalue " + std::to_string(l) +
                              " outside the unit disc");

    FilterDesign d;
    d.model = build_single_section(params);
    d.model_discrete = discretize(d.model, dt);
    d.dt = dt;
    d.v_base = params.v_base();
    d.i_base = params.i_base();
    d.threshold_pu = threshold_pu;
    d.magnitude_gain = magnitude_gain;
    d.assigned_eigenvalues = lam;

    const Mat12x8 F = fault_event_basis();
    std::vector<Subspace> spaces;
    spaces.reserve(8);
    Eigen::MatrixXd G(12, 8);
    for (int i = 0; i < 8; ++i) {
        Subspace s = detection_space(d.model, F.col(i));
        if (s.dim() != 1)
            throw DesignError("detection space of event vector " + std::to_string(i + 1) +
                              " has dimension " + std::to_string(s.dim()) +
                              ", expected 1");
        G.col(i) = detection_generator(d.model, F.col(i), s);
        spaces.push_back(std::move(s));
    }
    d.generators = G;

    const Subspace total = multiple_detection_space(d.model, F);
    const auto sep = check_output_separable(d.model, F);
    if (!sep.separable)
        throw DesignError("event vectors are not output separable (rank F = " +
                          std::to_string(sep.rank_F) + ", rank CF = " +
                          std::to_string(sep.rank_CF) + ")");
    const Subspace excess = excess_subspace(d.model, total, spaces);
    d.excess_basis = excess.basis;

    // bilinear preimages of the requested discrete eigenvalues
    d.assigned_continuous.resize(8);
    for (int i = 0; i < 8; ++i)
        d.assigned_continuous[static_cast<size_t>(i)] =
            (2.0 / dt) * (lam[static_cast<size_t>(i)] - 1.0) / (lam[static_cast<size_t>(i)] + 1.0);

    d.D = compute_feedback(d.model, G, d.assigned_continuous);

    auto [T, Tm_si] = canonical_transform(d.model, G, excess.basis);
    d.T = T;
    d.Tm = Tm_si / d.v_base; // per-unit output transform

    // fixed eigenvalues from the quotient block of the discrete transition
    const Mat12 phi = d.closed_loop_discrete();
    const Mat12 phi_canon = d.T.partialPivLu().solve(phi * d.T);
    const Eigen::Matrix4d N = phi_canon.bottomRightCorner<4, 4>();
    const Eigen::EigenSolver<Eigen::Matrix4d> es(N);
    d.unassignable_eigenvalues.assign(es.eigenvalues().data(),
                                      es.eigenvalues().data() + 4);
    std::sort(d.unassignable_eigenvalues.begin(), d.unassignable_eigenvalues.end(),
              [](auto a, auto b) {
                  return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
              });
    return d;
}

namespace {

double multiset_distance(std::vector<std::complex<double>> a,
                         std::vector<std::complex<double>> b) {
    // greedy nearest pairing; fine for well-separated spectra
    double worst = 0.0;
    for (const auto& x : a) {
        double best = std::numeric_limits<double>::infinity();
        size_t at = 0;
        for (size_t j = 0; j < b.size(); ++j) {
            const double dd = std::abs(x - b[j]);
            if (dd < best) { best = dd; at = j; }
        }
        if (b.empty()) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, best);
        b.erase(b.begin() + static_cast<long>(at));
    }
    return worst;
}

} // namespace

std::string DesignReport::to_string() const {
    std::ostringstream os;
    os << "detection filter verification\n";
    for (const auto& c : checks) {
        os << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name
           << "  (" << c.value << ")";
        if (!c.detail.empty()) os << "  " << c.detail;
        os << "\n";
    }
    os << "  unassignable eigenvalues:";
    for (const auto& u : unassignable) {
        os << " " << u.real();
        if (u.imag() != 0.0) os << (u.imag() > 0 ? "+" : "") << u.imag() << "j";
    }
    os << "\n  cond([C g_i]) = " << cg_condition << "\n";
    os << (ok ? "  all checks passed\n" : "  VERIFICATION FAILED\n");
    return os.str();
}

DesignReport verify_design(const FilterDesign& design) {
    DesignReport rep;
    auto add = [&rep](const std::string& name, bool pass, double value,
                      std::string detail = "") {
        rep.checks.push_back({name, pass, value, std::move(detail)});
    };

    const Mat12x8 F = fault_event_basis();
    const Mat12 phi = design.closed_loop_discrete();

    // eigenvalue placement on the discrete transition matrix
    Eigen::EigenSolver<Mat12> es(phi);
    std::vector<std::complex<double>> spectrum(es.eigenvalues().data(),
                                               es.eigenvalues().data() + 12);
    std::vector<std::complex<double>> expected;
    for (double l : design.assigned_eigenvalues) expected.emplace_back(l, 0.0);
    for (const auto& u : design.unassignable_eigenvalues) expected.push_back(u);
    const double placement = multiset_distance(expected, spectrum);
    add("spectrum matches assigned+unassignable", placement <= 1e-6, placement);

    // detection-space invariance under the continuous closed loop
    const Mat12 Mcl = design.closed_loop_continuous();
    double worst_inv = 0.0;
    for (int i = 0; i < 8; ++i) {
        const Eigen::VectorXd b = design.generators.col(i).normalized();
        const Eigen::VectorXd img = Mcl * b;
        const double res = (img - b * (b.dot(img))).norm() / std::max(1.0, img.norm());
        worst_inv = std::max(worst_inv, res);
    }
    add("detection spaces invariant under A-DC", worst_inv <= 1e-8, worst_inv);

    // transforms invertible
    const double t_defect =
        (design.T * design.T.partialPivLu().inverse() - Mat12::Identity()).norm();
    add("T inverse consistent", t_defect <= 1e-9, t_defect);
    const double tm_defect =
        (design.Tm * design.Tm.partialPivLu().inverse() - Mat8::Identity()).norm();
    add("Tm inverse consistent", tm_defect <= 1e-9, tm_defect);

    // separability bookkeeping
    const auto sep = check_output_separable(design.model, F);
    add("event vectors output separable", sep.separable,
        static_cast<double>(sep.rank_CF),
        "rank F = " + std::to_string(sep.rank_F) +
            ", rank CF = " + std::to_string(sep.rank_CF));

    // excess subspace inside null(C)
    double excess_res = 0.0;
    if (design.excess_basis.cols() > 0)
        excess_res = (design.model.C * design.excess_basis).cwiseAbs().maxCoeff();
    add("excess subspace inside null(C)", excess_res <= 1e-10, excess_res);

    // canonical structure: Tm^{-1} C_pu f_i = e_i
    const Mat8 cpu_f = (design.model.C * F) / design.v_base;
    const Mat8 unit = design.Tm.partialPivLu().solve(cpu_f);
    const double canon_res = (unit - Mat8::Identity()).cwiseAbs().maxCoeff();
    add("canonical residual directions are unit vectors", canon_res <= 1e-9, canon_res);

    // leading canonical block diagonal with the assigned eigenvalues
    const Mat12 phi_canon = design.T.partialPivLu().solve(phi * design.T);
    Mat8 lead = phi_canon.topLeftCorner<8, 8>();
    for (int i = 0; i < 8; ++i)
        lead(i, i) -= design.assigned_eigenvalues[static_cast<size_t>(i)];
    add("leading canonical block diagonal", lead.cwiseAbs().maxCoeff() <= 1e-6,
        lead.cwiseAbs().maxCoeff());

    // unassignable eigenvalues stable and independent of the assignment
    double max_mag = 0.0;
    for (const auto& u : design.unassignable_eigenvalues)
        max_mag = std::max(max_mag, std::abs(u));
    add("unassignable eigenvalues stable", max_mag < 1.0, max_mag);

    {
        std::vector<double> alt(8);
        for (int i = 0; i < 8; ++i) {
            const double l = design.assigned_eigenvalues[static_cast<size_t>(i)];
            const double shifted = (l < 0.5) ? l + 0.1 : l - 0.1;
            alt[static_cast<size_t>(i)] = (2.0 / design.dt) * (shifted - 1.0) / (shifted + 1.0);
        }
        FilterDesign d2 = design;
        d2.D = compute_feedback(design.model, design.generators, alt);
        const Mat12 phi2 = d2.closed_loop_discrete();
        const Mat12 pc2 = design.T.partialPivLu().solve(phi2 * design.T);
        Eigen::EigenSolver<Eigen::Matrix4d> es2(pc2.bottomRightCorner<4, 4>());
        std::vector<std::complex<double>> fixed2(es2.eigenvalues().data(),
                                                 es2.eigenvalues().data() + 4);
        const double drift = multiset_distance(design.unassignable_eigenvalues, fixed2);
        add("unassignable set independent of assignment", drift <= 1e-8, drift);
    }

    const Mat8 CG = design.model.C * design.generators;
    Eigen::JacobiSVD<Mat8> svd(CG);
    rep.cg_condition = svd.singularValues()(0) / svd.singularValues()(7);

    rep.unassignable = design.unassignable_eigenvalues;
    rep.ok = std::all_of(rep.checks.begin(), rep.checks.end(),
                         [](const DesignCheck& c) { return c.pass; });
    return rep;
}

} // namespace tlfd
