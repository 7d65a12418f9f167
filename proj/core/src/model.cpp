#include "tlfd/model.hpp"

#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "tlfd/errors.hpp"

namespace tlfd {

std::string to_string(FaultType t) {
    switch (t) {
        case FaultType::AG: return "A-G";
        case FaultType::BG: return "B-G";
        case FaultType::CG: return "C-G";
        case FaultType::AB: return "A-B";
        case FaultType::BC: return "B-C";
        case FaultType::CA: return "C-A";
        case FaultType::ABC: return "A-B-C";
    }
    return "?";
}

FaultType fault_type_from_string(const std::string& s) {
    if (s == "A-G") return FaultType::AG;
    if (s == "B-G") return FaultType::BG;
    if (s == "C-G") return FaultType::CG;
    if (s == "A-B" || s == "B-A") return FaultType::AB;
    if (s == "B-C" || s == "C-B") return FaultType::BC;
    if (s == "C-A" || s == "A-C") return FaultType::CA;
    if (s == "A-B-C" || s == "ABC") return FaultType::ABC;
    throw ModelError("unknown fault type '" + s + "'");
}

bool is_single_phase(FaultType t) {
    return t == FaultType::AG || t == FaultType::BG || t == FaultType::CG;
}

std::array<int, 3> faulted_phases(FaultType t, int* count) {
    std::array<int, 3> out{-1, -1, -1};
    switch (t) {
        case FaultType::AG: out = {0, -1, -1}; *count = 1; break;
        case FaultType::BG: out = {1, -1, -1}; *count = 1; break;
        case FaultType::CG: out = {2, -1, -1}; *count = 1; break;
        case FaultType::AB: out = {0, 1, -1}; *count = 2; break;
        case FaultType::BC: out = {1, 2, -1}; *count = 2; break;
        case FaultType::CA: out = {2, 0, -1}; *count = 2; break;
        case FaultType::ABC: out = {0, 1, 2}; *count = 3; break;
    }
    return out;
}

int current_channel_from_name(const std::string& name) {
    for (int i = 0; i < 8; ++i)
        if (name == kCurrentChannelNames[static_cast<size_t>(i)]) return i;
    return -1;
}

bool is_symmetric(const Mat4& m, double rel_tol) {
    double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return true;
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_positive_definite(const Mat4& m) {
    if (!is_symmetric(m, 1e-9)) return false;
    Eigen::LLT<Mat4> llt(m);
    return llt.info() == Eigen::Success;
}

void LineParameters::validate() const {
    if (!(length_km > 0.0)) throw ModelError("length_km must be positive");
    if (!(v_rated > 0.0)) throw ModelError("v_rated must be positive");
    if (!(i_rated > 0.0)) throw ModelError("i_rated must be positive");
    if (!is_symmetric(R)) throw ModelError("R matrix is not symmetric");
    if (!is_symmetric(L)) throw ModelError("L matrix is not symmetric");
    if (!is_symmetric(Cap)) throw ModelError("Cap matrix is not symmetric");
    if (!is_positive_definite(R)) throw ModelError("R matrix is not positive definite");
    if (!is_positive_definite(L)) throw ModelError("L matrix is not positive definite");
    Eigen::FullPivLU<Mat4> lu(Cap);
    if (!lu.isInvertible()) throw ModelError("Cap matrix is singular");
}

Mat4 measurement_K() {
    Mat4 K;
    K << 1, 0, 0, -1,
         0, 1, 0, -1,
         0, 0, 1, -1,
         0, 0, 0, 1;
    return K;
}

StateSpaceModel build_single_section(const LineParameters& params) {
    params.validate();

    Eigen::FullPivLU<Mat4> cap_lu(params.Cap);
    if (!cap_lu.isInvertible())
        throw ModelError("model construction failed: Cap matrix is singular");
    Eigen::FullPivLU<Mat4> l_lu(params.L);
    if (!l_lu.isInvertible())
        throw ModelError("model construction failed: L matrix is singular");

    const Mat4 cap_inv = cap_lu.inverse();
    const Mat4 l_inv = l_lu.inverse();
    const Mat4 E = Mat4::Identity();

    // dz/dt blocks for z = [Cap v1; Cap v2; L iL]:
    //   d(Cap v1)/dt = i1 - iL
    //   d(Cap v2)/dt = i2 + iL
    //   d(L iL)/dt   = v1 - v2 - R iL
    Mat12 A1p = Mat12::Zero();
    A1p.block<4, 4>(0, 8) = -E;
    A1p.block<4, 4>(4, 8) = E;
    A1p.block<4, 4>(8, 0) = E;
    A1p.block<4, 4>(8, 4) = -E;
    A1p.block<4, 4>(8, 8) = -params.R;

    Mat12 B1_inv = Mat12::Zero();
    B1_inv.block<4, 4>(0, 0) = cap_inv;
    B1_inv.block<4, 4>(4, 4) = cap_inv;
    B1_inv.block<4, 4>(8, 8) = l_inv;

    StateSpaceModel m;
    m.A = A1p * B1_inv;
    m.B.setZero();
    m.B.block<8, 8>(0, 0).setIdentity();

    const Mat4 K = measurement_K();
    Mat8x12 Cx = Mat8x12::Zero();
    Cx.block<4, 4>(0, 0) = K;
    Cx.block<4, 4>(4, 4) = K;
    m.C = Cx * B1_inv;

    m.coord = StateSpaceModel::Coord::ScaledZ;
    m.time = StateSpaceModel::Time::Continuous;
    return m;
}

StateSpaceModel discretize(const StateSpaceModel& model, double dt) {
    if (!model.continuous()) throw ModelError("discretize expects a continuous model");
    if (!(dt > 0.0)) throw ModelError("discretize: dt must be positive");

    // [Ad Bd; 0 I] = exp([A B; 0 0] dt)
    Eigen::Matrix<double, 24, 24> aug = Eigen::Matrix<double, 24, 24>::Zero();
    aug.topLeftCorner<12, 12>() = model.A * dt;
    aug.topRightCorner<12, 12>() = model.B * dt;
    const Eigen::Matrix<double, 24, 24> e = aug.exp();

    StateSpaceModel d = model;
    d.A = e.topLeftCorner<12, 12>();
    d.B = e.topRightCorner<12, 12>();
    d.time = StateSpaceModel::Time::Discrete;
    d.dt = dt;
    return d;
}

Mat12x8 fault_event_basis() {
    Mat12x8 F = Mat12x8::Zero();
    F.block<4, 4>(0, 0).setIdentity();
    F.block<4, 4>(4, 4).setIdentity();
    return F;
}

Mat4 fault_conductance(FaultType type, double r_fault_ohm) {
    if (!(r_fault_ohm > 0.0))
        throw ModelError("fault_conductance: fault resistance must be positive");
    const double g = 1.0 / r_fault_ohm;
    Mat4 G = Mat4::Zero();
    int n = 0;
    const auto ph = faulted_phases(type, &n);
    if (n == 1) {
        G(ph[0], ph[0]) = g;
    } else if (n == 2) {
        G(ph[0], ph[0]) += g;
        G(ph[1], ph[1]) += g;
        G(ph[0], ph[1]) -= g;
        G(ph[1], ph[0]) -= g;
    } else {
        // delta of three Rf legs between the phases
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) G(i, j) = (i == j) ? 2.0 * g : -g;
    }
    return G;
}

Vec12 FaultSignature::direction() const {
    const Mat12x8 F = fault_event_basis();
    Vec12 d = Vec12::Zero();
    for (const auto& [idx, coeff] : combination) d += coeff * F.col(idx);
    return d;
}

FaultSignature fault_signature(FaultType type, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ModelError("fault_signature: alpha must lie in (0,1)");

    FaultSignature s;
    int n = 0;
    const auto ph = faulted_phases(type, &n);
    if (n == 1) {
        s.combination = {{ph[0], 1.0 - alpha}, {ph[0] + 4, alpha}};
        const char p = static_cast<char>('a' + ph[0]);
        s.magnitude = std::string("v_") + p + "f(t)/Rf";
    } else if (n == 2) {
        s.combination = {{ph[0], 1.0 - alpha}, {ph[1], -(1.0 - alpha)},
                         {ph[0] + 4, alpha}, {ph[1] + 4, -alpha}};
        const char p = static_cast<char>('a' + ph[0]);
        const char q = static_cast<char>('a' + ph[1]);
        s.magnitude = std::string("(v_") + p + "f(t) - v_" + q + "f(t))/Rf";
    } else {
        // representative phase-A component; B and C follow by rotation
        s.combination = {{0, 1.0 - alpha}, {4, alpha}};
        s.magnitude = "(2v_af(t) - v_bf(t) - v_cf(t))/Rf";
    }
    return s;
}

FaultSignature bad_data_signature(int current_channel) {
    if (current_channel < 0 || current_channel > 7)
        throw ModelError("bad_data_signature: channel index out of range");
    FaultSignature s;
    s.combination = {{current_channel, 1.0}};
    s.magnitude = std::string(kCurrentChannelNames[static_cast<size_t>(current_channel)]) + "(t)";
    return s;
}

LadderNetwork concatenate_sections(const LineParameters& params, int n_sections) {
    if (n_sections < 1) throw ModelError("concatenate_sections: n must be >= 1");
    params.validate();
    LadderNetwork net;
    net.n_sections = n_sections;
    const double inv = 1.0 / n_sections;
    net.R_section = params.R * inv;
    net.L_section = params.L * inv;
    net.C_section = params.Cap * inv;
    net.section_km = params.length_km * inv;
    return net;
}

} // namespace tlfd
