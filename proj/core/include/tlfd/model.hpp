#pragma once

#include <utility>
#include <vector>

#include "tlfd/types.hpp"

namespace tlfd {

/// State-space model of the healthy single-section line in scaled coordinates
/// z = B1*x, x = [v1; v2; iL], B1 = blockdiag(Cap, Cap, L).
///
/// Continuous form:  dz/dt = A z + B u,   y = C z
/// with u = [i1; i2; 0] (amperes) and y the eight terminal voltage
/// measurements (volts): per terminal, three phase-to-neutral voltages and
/// the neutral-to-ground pseudo measurement.
struct StateSpaceModel {
    enum class Coord { ScaledZ, Canonical };
    enum class Time { Continuous, Discrete };

    Mat12 A = Mat12::Zero();
    Mat12 B = Mat12::Zero();
    Mat8x12 C = Mat8x12::Zero();
    Coord coord = Coord::ScaledZ;
    Time time = Time::Continuous;
    double dt = 0.0; // seconds, discrete form only

    bool continuous() const { return time == Time::Continuous; }
};

/// Terminal-voltage selector: rows are va-vn, vb-vn, vc-vn, vn.
Mat4 measurement_K();

/// Build the continuous scaled-z model from line constants.
/// Throws ModelError if Cap or L is singular (names the matrix).
StateSpaceModel build_single_section(const LineParameters& params);

/// Exact zero-order-hold discretization: Ad = exp(A dt), Bd = int_0^dt exp(As) ds B.
StateSpaceModel discretize(const StateSpaceModel& model, double dt);

/// The 12x8 event-vector matrix [E4 0; 0 E4; 0 0]; columns f1..f8 target the
/// left- then right-terminal current channels (A,B,C,N each).
Mat12x8 fault_event_basis();

/// 4x4 fault conductance G such that the fault branch draws i = G v at the
/// fault point. Ground faults place 1/Rf on the faulted phase diagonal;
/// phase-phase faults a [1 -1; -1 1]/Rf block; the three-phase pattern is the
/// delta of Rf legs, rows (2,-1,-1)/Rf over A,B,C.
Mat4 fault_conductance(FaultType type, double r_fault_ohm);

/// Event-vector combination for a fault or a lost current channel:
/// the state direction is sum(coefficient * f_index) and the scalar fault
/// magnitude n(t) is described by `magnitude`.
struct FaultSignature {
    std::vector<std::pair<int, double>> combination; // (event index 0..7, coeff)
    std::string magnitude;

    Vec12 direction() const;
};

/// Line-fault signature at per-unit distance alpha from the left terminal.
/// Throws ModelError for alpha outside (0,1).
FaultSignature fault_signature(FaultType type, double alpha);

/// Bad-data signature for a lost current channel: the event vector itself.
FaultSignature bad_data_signature(int current_channel);

/// Uniform ladder description consumed by the simulator: n series R-L
/// branches and n+1 shunt capacitor groups (per-section matrices).
struct LadderNetwork {
    int n_sections = 0;
    Mat4 R_section;
    Mat4 L_section;
    Mat4 C_section; // per section *end*; interior nodes carry two of these
    double section_km = 0.0;
};

/// Split the full-line matrices uniformly over n sections. Throws ModelError
/// for n < 1.
LadderNetwork concatenate_sections(const LineParameters& params, int n_sections);

} // namespace tlfd
