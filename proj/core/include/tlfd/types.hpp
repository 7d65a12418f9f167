#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

namespace tlfd {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8x12 = Eigen::Matrix<double, 8, 12>;
using Mat12x8 = Eigen::Matrix<double, 12, 8>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kNominalHz = 60.0;
inline constexpr double kOmega0 = kTwoPi * kNominalHz;

/// Conductor order used everywhere: A, B, C, N.
enum class Phase : int { A = 0, B = 1, C = 2, N = 3 };

enum class FaultType {
    AG,
    BG,
    CG,
    AB,
    BC,
    CA,
    ABC,
};

std::string to_string(FaultType t);
FaultType fault_type_from_string(const std::string& s);

/// True for A-G / B-G / C-G.
bool is_single_phase(FaultType t);
/// Faulted phase indices (1 for ground faults, 2 for phase-phase, 3 for ABC).
std::array<int, 3> faulted_phases(FaultType t, int* count);

/// Current-measurement channels, indexing the 8 current waveform columns and
/// the 8 fault event vectors alike: ia1 ib1 ic1 in1 ia2 ib2 ic2 in2.
inline constexpr std::array<const char*, 8> kCurrentChannelNames = {
    "ia1", "ib1", "ic1", "in1", "ia2", "ib2", "ic2", "in2"};
inline constexpr std::array<const char*, 8> kVoltageChannelNames = {
    "va1", "vb1", "vc1", "vn1", "va2", "vb2", "vc2", "vn2"};

int current_channel_from_name(const std::string& name);

/// 4x4 phase-domain parameter matrix checks (conductors A,B,C,N).
bool is_symmetric(const Mat4& m, double rel_tol = 1e-9);
bool is_positive_definite(const Mat4& m);

/// Phase-domain line constants plus ratings. R in ohm, L in henry, Cap in
/// farad; all 4x4 over conductors {A,B,C,N} for the full line length.
struct LineParameters {
    Mat4 R;
    Mat4 L;
    Mat4 Cap;
    double length_km = 0.0;
    double v_rated = 0.0; // line-to-line volts
    double i_rated = 0.0; // amperes, rms

    /// Peak of the rated phase-to-neutral voltage: v_rated * sqrt(2/3).
    double v_base() const { return v_rated * 0.81649658092772603273; }
    /// Peak of the rated current: i_rated * sqrt(2).
    double i_base() const { return i_rated * 1.41421356237309504880; }

    /// Throws ModelError naming the offending matrix/field.
    void validate() const;
};

} // namespace tlfd
