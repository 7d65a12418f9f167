#pragma once

#include <complex>
#include <string>
#include <vector>

#include "tlfd/model.hpp"
#include "tlfd/subspace.hpp"
#include "tlfd/types.hpp"

namespace tlfd {

/// Smallest (A - DC)-invariant subspace containing the event vector f whose
/// output image stays unidirectional. Computed from the null space of the
/// stacked matrix M_d' = [C'; C'(A-Df C); ...; C'(A-Df C)^{n-1}] with
/// Df = A f [(Cf)^T (Cf)]^{-1} (Cf)^T and C' the projection of C away from Cf.
/// Each block row is renormalized before stacking (row scaling leaves the
/// null space unchanged) so the computation stays conditioned for models in
/// physical units.
///
/// Throws DesignError when C f = 0 (event vector unobservable).
Subspace detection_space(const StateSpaceModel& model, const Eigen::VectorXd& f);

/// Rank of the stacked M_d' matrix itself (ambient dim minus detection-space
/// dimension); exposed because the dimension bookkeeping is part of the
/// design verification.
int detection_observability_rank(const StateSpaceModel& model, const Eigen::VectorXd& f);

/// Cyclic generator g of a detection space: {g, Ag, ..., A^{v-1} g} spans the
/// space, C A^k g = 0 for k < v-1 and C A^{v-1} g = C f. For v = 1 this is f
/// itself. Throws DesignError if no solution exists within tolerance.
Eigen::VectorXd detection_generator(const StateSpaceModel& model,
                                    const Eigen::VectorXd& f,
                                    const Subspace& space,
                                    double tol = 1e-8);

/// Joint detection space for a multiple-failure matrix F (same construction
/// with the matrix generalization). Throws DesignError if C F loses column
/// rank (output-separability failure).
Subspace multiple_detection_space(const StateSpaceModel& model, const Eigen::MatrixXd& F);

struct SeparabilityReport {
    int rank_F = 0;
    int rank_CF = 0;
    bool separable = false;
};

/// Output separable iff rank(F) = rank(C F).
SeparabilityReport check_output_separable(const StateSpaceModel& model,
                                          const Eigen::MatrixXd& F);

/// Mutually detectable iff the individual dimensions sum to the joint one.
bool check_mutually_detectable(const std::vector<Subspace>& spaces, const Subspace& total);

/// Complement R0 with total = R1 + ... + Rr + R0 (direct sum) and R0 inside
/// null(C). Throws DesignError if no such complement exists.
Subspace excess_subspace(const StateSpaceModel& model,
                         const Subspace& total,
                         const std::vector<Subspace>& spaces);

/// Feedback gain D with (A - D C) g_i = mu_i g_i for one-dimensional
/// detection spaces: D = [A g_1 - mu_1 g_1, ...] [C g_1 ... C g_r]^{-1}.
/// `eigenvalues` are targets in the model's own time domain (continuous
/// model: continuous-plane values; discrete model: z-plane values).
/// Throws DesignError if [C g_i] is singular (names the generator set).
Eigen::MatrixXd compute_feedback(const StateSpaceModel& model,
                                 const Eigen::MatrixXd& generators,
                                 const std::vector<double>& eigenvalues);

/// Canonical transforms: T = [g-chains | excess basis] (new coordinates are
/// coefficients in that basis, so T^{-1} f_i = e_i), and Tm whose inverse
/// maps the output images C A^{v_i-1} g_i to unit vectors.
/// Throws DesignError if either matrix is singular.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> canonical_transform(
    const StateSpaceModel& model,
    const Eigen::MatrixXd& generators,
    const Eigen::MatrixXd& excess_basis);

/// Complete synthesized detection filter for the two-terminal line.
///
/// The gain D is computed on the continuous model so that the detection
/// spaces are exactly (A - DC)-invariant; the observer integrates the
/// continuous observer ODE with the trapezoidal rule at step dt. That
/// discretization is a rational function of (A - DC) and therefore keeps the
/// same eigenvectors: each requested discrete eigenvalue lambda_d is realized
/// exactly by targeting its bilinear preimage
///   mu = (2/dt) (lambda_d - 1)/(lambda_d + 1)
/// in the continuous design.
struct FilterDesign {
    StateSpaceModel model;          // continuous scaled-z model (SI units)
    StateSpaceModel model_discrete; // zero-order-hold companion at dt
    double dt = 0.0;
    double v_base = 0.0;
    double i_base = 0.0;
    double length_km = 0.0;

    Mat12x8 D = Mat12x8::Zero();    // continuous-time output-injection gain
    Mat12 T = Mat12::Identity();    // state transform, columns = generators|excess
    Mat8 Tm = Mat8::Zero();         // output transform, canonical = Tm^{-1} * raw
    Mat12x8 generators = Mat12x8::Zero();
    Eigen::MatrixXd excess_basis;   // 12 x 4
    std::vector<double> assigned_eigenvalues;              // discrete plane
    std::vector<double> assigned_continuous;               // bilinear preimages
    std::vector<std::complex<double>> unassignable_eigenvalues; // discrete plane

    double threshold_pu = 0.02;
    double magnitude_gain = 1.5;

    /// Discrete error-transition matrix of the trapezoidal observer:
    /// (I - dt/2 (A-DC))^{-1} (I + dt/2 (A-DC)).
    Mat12 closed_loop_discrete() const;
    Mat12 closed_loop_continuous() const { return model.A - D * model.C; }
};

/// Full synthesis for the line model: event basis (11), detection spaces,
/// generators, excess subspace, D, T, Tm and the eigenvalue report.
/// `lambda_discrete` holds 1 (broadcast) or 8 requested discrete eigenvalues,
/// each inside (-1, 1).
FilterDesign synthesize_filter(const LineParameters& params,
                               double dt,
                               const std::vector<double>& lambda_discrete,
                               double threshold_pu = 0.02,
                               double magnitude_gain = 1.5);

struct DesignCheck {
    std::string name;
    bool pass = false;
    double value = 0.0; // residual / magnitude backing the verdict
    std::string detail;
};

struct DesignReport {
    std::vector<DesignCheck> checks;
    std::vector<std::complex<double>> unassignable;
    double cg_condition = 0.0; // condition number of [C g_1 ... C g_8]
    bool ok = false;

    std::string to_string() const;
};

/// Self-consistency audit: eigenvalue placement, detection-space invariance,
/// separability/detectability bookkeeping, canonical structure, excess
/// subspace membership. Report-only; never throws on failed checks.
DesignReport verify_design(const FilterDesign& design);

} // namespace tlfd
