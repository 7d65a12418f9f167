#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlfd/model.hpp"
#include "tlfd/types.hpp"

namespace tlfd {

/// Balanced three-phase Thevenin source behind R_s + L_s per phase.
/// The line's neutral conductor is tied to ground at the terminal bus
/// through `ground_R` instead of connecting to the source.
struct SourceModel {
    double v_pu = 1.0;        // EMF amplitude in per unit of v_base
    double angle_rad = 0.0;   // phase-A angle at t = 0
    double R_s = 1.0;         // ohm
    double L_s = 10e-3;       // henry
};

struct FaultScenario {
    enum class Kind { Fault, CurrentLoss };

    int id = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    Kind kind = Kind::Fault;

    // Kind::Fault
    FaultType fault_type = FaultType::AG;
    double r_fault_ohm = 0.0;
    double location_km = 0.0;
    bool internal = true;

    // Kind::CurrentLoss
    int channel = -1; // index into kCurrentChannelNames
};

/// Sampled two-terminal records. Currents flow into the line at both
/// terminals; voltages are bus (phase-to-ground) quantities. Values are SI
/// unless per_unit is set.
struct Waveforms {
    double dt = 0.0;
    double v_base = 0.0;
    double i_base = 0.0;
    bool per_unit = false;
    std::vector<double> t;
    Eigen::MatrixXd currents; // n x 8: ia1 ib1 ic1 in1 ia2 ib2 ic2 in2
    Eigen::MatrixXd voltages; // n x 8: va1 vb1 vc1 vn1 va2 vb2 vc2 vn2

    long samples() const { return static_cast<long>(t.size()); }
    Waveforms to_per_unit() const;
};

/// Trapezoidal nodal simulator of the two-bus network: EMTP-style companion
/// models, 60 Hz phasor steady-state initialization, and two half-step
/// backward-Euler sub-steps after every topology change to damp switching
/// oscillation. A short stub section past the right bus hosts external
/// faults.
class Simulator {
public:
    Simulator(const LineParameters& line,
              const SourceModel& left,
              const SourceModel& right,
              double dt,
              int n_sections,
              bool with_stub,
              double stub_km = 0.032,
              double ground_R = 1e-4,
              bool steady_state_init = true);

    /// Apply / remove the fault branch. location_km is snapped to the nearest
    /// section boundary; external faults land on the stub end node.
    void set_fault(FaultType type, double r_fault_ohm, double location_km, bool internal);
    void clear_fault();

    /// Measurements at the current simulation time (state before stepping).
    void measure(Vec8& i_terminals, Vec8& v_terminals) const;
    double time() const { return t_; }

    /// Advance one full dt (internally two half steps right after switching).
    void step();

    /// Cumulative energy bookkeeping in joules since construction.
    double energy_delivered() const { return e_delivered_; }
    double energy_dissipated() const { return e_dissipated_; }
    double energy_stored() const;

    int n_sections() const { return n_; }

private:
    struct Companion;
    void assemble();
    void sub_step(double h, bool backward_euler);
    Eigen::VectorXd emf(double t) const;

    LineParameters line_;
    LadderNetwork ladder_;
    SourceModel src_[2];
    double dt_;
    int n_;
    bool stub_;
    double stub_km_;
    double ground_R_;
    Mat4 R_stub_, L_stub_, C_stub_;

    int nodes_ = 0;   // node groups of 4 conductors
    int dim_ = 0;     // 4 * nodes_
    double t_ = 0.0;
    int be_pending_ = 0; // half-step backward-Euler sub-steps still owed

    Eigen::VectorXd v_;                  // node voltages
    std::vector<Vec4> i_sections_;       // series branch currents, left->right
    Vec4 i_stub_ = Vec4::Zero();
    Eigen::Vector3d i_src_[2];           // source branch currents (phases)
    std::vector<Vec4> i_caps_;           // shunt group currents (into caps)
    std::vector<std::pair<int, Mat4>> cap_groups_; // (node, C matrix)
    int line_cap_left_ = 0, line_cap_right_ = 0;   // indices into cap_groups_

    bool fault_active_ = false;
    int fault_node_ = -1;
    Mat4 fault_G_ = Mat4::Zero();

    // companion values for the current sub-step length/mode
    struct Stamps {
        Mat4 Y_sec, Z_sec, Y_stub, Z_stub;
        double y_src = 0.0, z_src = 0.0;
        std::vector<Mat4> Y_cap;
        bool backward_euler = false;
        double h = 0.0;
    } st_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    bool stamps_valid_ = false;

    double e_delivered_ = 0.0;
    double e_dissipated_ = 0.0;
};

/// Run a scenario list and sample the two-terminal measurements on the
/// uniform grid t = 0, dt, ..., t_end. Scenarios must not overlap in time.
/// Current-loss scenarios are applied to the recorded waveforms afterwards
/// (the network itself is unaffected by a metering loss).
Waveforms simulate(const std::vector<FaultScenario>& scenarios,
                   const LineParameters& line,
                   const SourceModel& left,
                   const SourceModel& right,
                   double t_end,
                   double dt,
                   int n_sections);

/// Independent uniform noise in [-amplitude, +amplitude] (per unit) on every
/// channel except the neutral-voltage pseudo measurements vn1/vn2.
Waveforms add_noise(const Waveforms& w, double amplitude_pu, std::uint64_t seed);

/// Force a current channel to zero over [t_start, t_end). Voltage channels
/// are rejected (only current loss is modeled).
Waveforms inject_bad_data(const Waveforms& w, int current_channel,
                          double t_start, double t_end);

/// The standard 0..6.4 s event schedule for the shipped test system:
/// simulate all fault scenarios, add measurement noise, then apply the
/// current-loss events.
Waveforms run_event_table(const LineParameters& line,
                          const SourceModel& left,
                          const SourceModel& right,
                          const std::vector<FaultScenario>& events,
                          double dt,
                          int n_sections,
                          double noise_pu,
                          std::uint64_t seed,
                          double t_end = 6.4);

} // namespace tlfd
