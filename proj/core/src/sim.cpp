#include "tlfd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "tlfd/errors.hpp"

namespace tlfd {

namespace {

constexpr double kStubDefaultKm = 0.032;

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

} // namespace

Waveforms Waveforms::to_per_unit() const {
    if (per_unit) return *this;
    Waveforms w = *this;
    w.currents /= i_base;
    w.voltages /= v_base;
    w.per_unit = true;
    return w;
}

Simulator::Simulator(const LineParameters& line,
                     const SourceModel& left,
                     const SourceModel& right,
                     double dt,
                     int n_sections,
                     bool with_stub,
                     double stub_km,
                     double ground_R,
                     bool steady_state_init)
    : line_(line),
      ladder_(concatenate_sections(line, n_sections)),
      dt_(dt),
      n_(n_sections),
      stub_(with_stub),
      stub_km_(stub_km),
      ground_R_(ground_R) {
    if (!(dt > 0.0)) throw SimError("simulator: dt must be positive");
    src_[0] = left;
    src_[1] = right;

    const double fr = stub_km_ / line.length_km;
    R_stub_ = line.R * fr;
    L_stub_ = line.L * fr;
    C_stub_ = line.Cap * fr;

    nodes_ = n_ + 1 + (stub_ ? 1 : 0);
    dim_ = 4 * nodes_;
    v_ = Eigen::VectorXd::Zero(dim_);
    i_sections_.assign(static_cast<size_t>(n_), Vec4::Zero());
    i_src_[0].setZero();
    i_src_[1].setZero();

    for (int j = 0; j <= n_; ++j) {
        const double mult = (j == 0 || j == n_) ? 1.0 : 2.0;
        cap_groups_.emplace_back(j, Mat4(mult * ladder_.C_section));
    }
    line_cap_left_ = 0;
    line_cap_right_ = n_;
    if (stub_) {
        cap_groups_.emplace_back(n_, C_stub_);
        cap_groups_.emplace_back(n_ + 1, C_stub_);
    }
    i_caps_.assign(cap_groups_.size(), Vec4::Zero());

    if (steady_state_init) {
        // 60 Hz phasor solution of the healthy network
        CMat Y = CMat::Zero(dim_, dim_);
        const Cplx jw(0.0, kOmega0);
        auto blk = [&](int a, int b) { return Y.block<4, 4>(4 * a, 4 * b); };
        for (const auto& [node, Cm] : cap_groups_)
            Y.block<4, 4>(4 * node, 4 * node) += jw * Cm;
        const CMat Zser = ladder_.R_section.cast<Cplx>() + jw * ladder_.L_section.cast<Cplx>();
        const CMat Yser = Zser.inverse();
        for (int s = 0; s < n_; ++s) {
            blk(s, s) += Yser;
            blk(s + 1, s + 1) += Yser;
            blk(s, s + 1) -= Yser;
            blk(s + 1, s) -= Yser;
        }
        CMat Yst;
        if (stub_) {
            const CMat Zst = R_stub_.cast<Cplx>() + jw * L_stub_.cast<Cplx>();
            Yst = Zst.inverse();
            blk(n_, n_) += Yst;
            blk(n_ + 1, n_ + 1) += Yst;
            blk(n_, n_ + 1) -= Yst;
            blk(n_ + 1, n_) -= Yst;
        }
        CVec rhs = CVec::Zero(dim_);
        const Cplx a = std::exp(Cplx(0.0, -kTwoPi / 3.0));
        Cplx esrc[2][3];
        for (int t = 0; t < 2; ++t) {
            const Cplx ysrc = 1.0 / Cplx(src_[t].R_s, kOmega0 * src_[t].L_s);
            const int node = (t == 0) ? 0 : n_;
            const Cplx rot = std::exp(Cplx(0.0, src_[t].angle_rad));
            for (int p = 0; p < 3; ++p) {
                esrc[t][p] = src_[t].v_pu * line_.v_base() * rot * std::pow(a, p);
                Y(4 * node + p, 4 * node + p) += ysrc;
                rhs(4 * node + p) += ysrc * esrc[t][p];
            }
        }
        Y(3, 3) += 1.0 / ground_R_;
        Y(4 * n_ + 3, 4 * n_ + 3) += 1.0 / ground_R_;

        const CVec V = Y.partialPivLu().solve(rhs);
        v_ = V.real();
        for (int s = 0; s < n_; ++s) {
            const Eigen::Vector4cd dv = V.segment<4>(4 * s) - V.segment<4>(4 * (s + 1));
            i_sections_[static_cast<size_t>(s)] = (Yser * dv).real();
        }
        if (stub_) {
            const Eigen::Vector4cd dv = V.segment<4>(4 * n_) - V.segment<4>(4 * (n_ + 1));
            i_stub_ = (Yst * dv).real();
        }
        for (int t = 0; t < 2; ++t) {
            const Cplx ysrc = 1.0 / Cplx(src_[t].R_s, kOmega0 * src_[t].L_s);
            const int node = (t == 0) ? 0 : n_;
            for (int p = 0; p < 3; ++p)
                i_src_[t](p) = (ysrc * (esrc[t][p] - V(4 * node + p))).real();
        }
        for (size_t g = 0; g < cap_groups_.size(); ++g) {
            const auto& [node, Cm] = cap_groups_[g];
            i_caps_[g] = (jw * Cm.cast<Cplx>() * V.segment<4>(4 * node)).real();
        }
    }
    assemble();
}

Eigen::VectorXd Simulator::emf(double t) const {
    Eigen::VectorXd e(6);
    for (int term = 0; term < 2; ++term)
        for (int p = 0; p < 3; ++p)
            e(3 * term + p) = src_[term].v_pu * line_.v_base() *
                              std::cos(kOmega0 * t + src_[term].angle_rad -
                                       p * kTwoPi / 3.0);
    return e;
}

void Simulator::assemble() {
    const bool be = be_pending_ > 0;
    const double h = be ? dt_ / 2.0 : dt_;
    const double k = be ? 1.0 : 2.0;

    st_.backward_euler = be;
    st_.h = h;
    st_.Y_sec = (ladder_.R_section + (k / h) * ladder_.L_section).inverse();
    st_.Z_sec = (k / h) * ladder_.L_section - (be ? Mat4::Zero() : ladder_.R_section);
    st_.Y_stub = (R_stub_ + (k / h) * L_stub_).inverse();
    st_.Z_stub = (k / h) * L_stub_ - (be ? Mat4::Zero() : R_stub_);
    st_.Y_cap.clear();
    for (const auto& [node, Cm] : cap_groups_) st_.Y_cap.push_back((k / h) * Cm);

    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(dim_, dim_);
    auto blk = [&](int a, int b) { return Y.block<4, 4>(4 * a, 4 * b); };
    for (size_t g = 0; g < cap_groups_.size(); ++g) {
        const int node = cap_groups_[g].first;
        Y.block<4, 4>(4 * node, 4 * node) += st_.Y_cap[g];
    }
    for (int s = 0; s < n_; ++s) {
        blk(s, s) += st_.Y_sec;
        blk(s + 1, s + 1) += st_.Y_sec;
        blk(s, s + 1) -= st_.Y_sec;
        blk(s + 1, s) -= st_.Y_sec;
    }
    if (stub_) {
        blk(n_, n_) += st_.Y_stub;
        blk(n_ + 1, n_ + 1) += st_.Y_stub;
        blk(n_, n_ + 1) -= st_.Y_stub;
        blk(n_ + 1, n_) -= st_.Y_stub;
    }
    for (int term = 0; term < 2; ++term) {
        const int node = (term == 0) ? 0 : n_;
        const double ysrc = 1.0 / (src_[term].R_s + (k / h) * src_[term].L_s);
        for (int p = 0; p < 3; ++p) Y(4 * node + p, 4 * node + p) += ysrc;
    }
    Y(3, 3) += 1.0 / ground_R_;
    Y(4 * n_ + 3, 4 * n_ + 3) += 1.0 / ground_R_;
    if (fault_active_) Y.block<4, 4>(4 * fault_node_, 4 * fault_node_) += fault_G_;

    lu_.compute(Y);
    stamps_valid_ = true;
}

void Simulator::set_fault(FaultType type, double r_fault_ohm, double location_km,
                          bool internal) {
    if (internal && (location_km < 0.0 || location_km > line_.length_km))
        throw SimError("fault location " + std::to_string(location_km) +
                       " km outside [0, " + std::to_string(line_.length_km) +
                       "] for an internal event");
    if (!internal && !stub_)
        throw SimError("external fault requested but the network has no stub section");

    fault_G_ = fault_conductance(type, r_fault_ohm);
    fault_node_ = internal
                      ? static_cast<int>(std::lround(location_km / ladder_.section_km))
                      : n_ + 1;
    fault_node_ = std::clamp(fault_node_, 0, nodes_ - 1);
    fault_active_ = true;
    be_pending_ = 2;
    assemble();
}

void Simulator::clear_fault() {
    fault_active_ = false;
    fault_node_ = -1;
    be_pending_ = 2;
    assemble();
}

void Simulator::measure(Vec8& i_terminals, Vec8& v_terminals) const {
    i_terminals.segment<4>(0) =
        i_caps_[static_cast<size_t>(line_cap_left_)] + i_sections_.front();
    i_terminals.segment<4>(4) =
        i_caps_[static_cast<size_t>(line_cap_right_)] - i_sections_.back();
    v_terminals.segment<4>(0) = v_.segment<4>(0);
    v_terminals.segment<4>(4) = v_.segment<4>(4 * n_);
}

double Simulator::energy_stored() const {
    double e = 0.0;
    for (size_t g = 0; g < cap_groups_.size(); ++g) {
        const auto& [node, Cm] = cap_groups_[g];
        const Vec4 vn = v_.segment<4>(4 * node);
        e += 0.5 * vn.dot(Cm * vn);
    }
    for (const auto& i : i_sections_) e += 0.5 * i.dot(ladder_.L_section * i);
    if (stub_) e += 0.5 * i_stub_.dot(L_stub_ * i_stub_);
    for (int t = 0; t < 2; ++t) e += 0.5 * src_[t].L_s * i_src_[t].squaredNorm();
    return e;
}

void Simulator::sub_step(double h, bool backward_euler) {
    const bool tr = !backward_euler;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_);

    std::vector<Vec4> h_cap(cap_groups_.size());
    for (size_t g = 0; g < cap_groups_.size(); ++g) {
        const int node = cap_groups_[g].first;
        const Vec4 vj = v_.segment<4>(4 * node);
        h_cap[g] = tr ? Vec4(-st_.Y_cap[g] * vj - i_caps_[g]) : Vec4(-st_.Y_cap[g] * vj);
        rhs.segment<4>(4 * node) -= h_cap[g];
    }
    std::vector<Vec4> h_sec(static_cast<size_t>(n_));
    for (int s = 0; s < n_; ++s) {
        const Vec4 dv = v_.segment<4>(4 * s) - v_.segment<4>(4 * (s + 1));
        h_sec[static_cast<size_t>(s)] =
            tr ? Vec4(st_.Y_sec * (dv + st_.Z_sec * i_sections_[static_cast<size_t>(s)]))
               : Vec4(st_.Y_sec * (st_.Z_sec * i_sections_[static_cast<size_t>(s)]));
        rhs.segment<4>(4 * s) -= h_sec[static_cast<size_t>(s)];
        rhs.segment<4>(4 * (s + 1)) += h_sec[static_cast<size_t>(s)];
    }
    Vec4 h_stub = Vec4::Zero();
    if (stub_) {
        const Vec4 dv = v_.segment<4>(4 * n_) - v_.segment<4>(4 * (n_ + 1));
        h_stub = tr ? Vec4(st_.Y_stub * (dv + st_.Z_stub * i_stub_))
                    : Vec4(st_.Y_stub * (st_.Z_stub * i_stub_));
        rhs.segment<4>(4 * n_) -= h_stub;
        rhs.segment<4>(4 * (n_ + 1)) += h_stub;
    }
    const Eigen::VectorXd e0 = emf(t_);
    const Eigen::VectorXd e1 = emf(t_ + h);
    double h_src[2][3];
    for (int term = 0; term < 2; ++term) {
        const int node = (term == 0) ? 0 : n_;
        const double k = tr ? 2.0 : 1.0;
        const double ysrc = 1.0 / (src_[term].R_s + (k / h) * src_[term].L_s);
        const double zsrc = (k / h) * src_[term].L_s - (tr ? src_[term].R_s : 0.0);
        for (int p = 0; p < 3; ++p) {
            const double hv =
                tr ? ysrc * ((e0(3 * term + p) - v_(4 * node + p)) + zsrc * i_src_[term](p))
                   : ysrc * (zsrc * i_src_[term](p));
            h_src[term][p] = hv;
            rhs(4 * node + p) += ysrc * e1(3 * term + p) + hv;
        }
    }

    const Eigen::VectorXd v_new = lu_.solve(rhs);
    if (!v_new.allFinite() || v_new.cwiseAbs().maxCoeff() > 1e12)
        throw SimError("simulation unstable at t = " + std::to_string(t_) +
                       " s; reduce the step size");

    // state updates + averaged-power energy bookkeeping
    const Eigen::VectorXd v_old = v_;
    std::vector<Vec4> i_sec_old = i_sections_;
    const Vec4 i_stub_old = i_stub_;
    Eigen::Vector3d i_src_old[2] = {i_src_[0], i_src_[1]};

    for (int s = 0; s < n_; ++s) {
        const Vec4 dv = v_new.segment<4>(4 * s) - v_new.segment<4>(4 * (s + 1));
        i_sections_[static_cast<size_t>(s)] = st_.Y_sec * dv + h_sec[static_cast<size_t>(s)];
    }
    if (stub_) {
        const Vec4 dv = v_new.segment<4>(4 * n_) - v_new.segment<4>(4 * (n_ + 1));
        i_stub_ = st_.Y_stub * dv + h_stub;
    }
    for (int term = 0; term < 2; ++term) {
        const int node = (term == 0) ? 0 : n_;
        const double k = tr ? 2.0 : 1.0;
        const double ysrc = 1.0 / (src_[term].R_s + (k / h) * src_[term].L_s);
        for (int p = 0; p < 3; ++p)
            i_src_[term](p) = ysrc * (e1(3 * term + p) - v_new(4 * node + p)) + h_src[term][p];
    }
    for (size_t g = 0; g < cap_groups_.size(); ++g) {
        const int node = cap_groups_[g].first;
        i_caps_[g] = st_.Y_cap[g] * v_new.segment<4>(4 * node) + h_cap[g];
    }
    v_ = v_new;
    t_ += h;

    for (int term = 0; term < 2; ++term) {
        const Eigen::Vector3d i_avg = 0.5 * (i_src_old[term] + i_src_[term]);
        for (int p = 0; p < 3; ++p) {
            const double e_avg = 0.5 * (e0(3 * term + p) + e1(3 * term + p));
            e_delivered_ += h * e_avg * i_avg(p);
            e_dissipated_ += h * src_[term].R_s * i_avg(p) * i_avg(p);
        }
    }
    for (int s = 0; s < n_; ++s) {
        const Vec4 i_avg = 0.5 * (i_sec_old[static_cast<size_t>(s)] +
                                  i_sections_[static_cast<size_t>(s)]);
        e_dissipated_ += h * i_avg.dot(ladder_.R_section * i_avg);
    }
    if (stub_) {
        const Vec4 i_avg = 0.5 * (i_stub_old + i_stub_);
        e_dissipated_ += h * i_avg.dot(R_stub_ * i_avg);
    }
    {
        const double vl = 0.5 * (v_old(3) + v_(3));
        const double vr = 0.5 * (v_old(4 * n_ + 3) + v_(4 * n_ + 3));
        e_dissipated_ += h * (vl * vl + vr * vr) / ground_R_;
    }
    if (fault_active_) {
        const Vec4 v_avg = 0.5 * (v_old.segment<4>(4 * fault_node_) +
                                  v_.segment<4>(4 * fault_node_));
        e_dissipated_ += h * v_avg.dot(fault_G_ * v_avg);
    }
}

void Simulator::step() {
    if (!stamps_valid_) assemble();
    if (be_pending_ > 0) {
        sub_step(dt_ / 2.0, true);
        sub_step(dt_ / 2.0, true);
        be_pending_ = 0;
        assemble();
    } else {
        sub_step(dt_, false);
    }
}

Waveforms simulate(const std::vector<FaultScenario>& scenarios,
                   const LineParameters& line,
                   const SourceModel& left,
                   const SourceModel& right,
                   double t_end,
                   double dt,
                   int n_sections) {
    std::vector<FaultScenario> faults;
    std::vector<FaultScenario> losses;
    bool any_external = false;
    for (const auto& s : scenarios) {
        if (!(s.t_start < s.t_end))
            throw SimError("scenario " + std::to_string(s.id) + ": t_start must precede t_end");
        if (s.kind == FaultScenario::Kind::Fault) {
            if (s.internal) {
                const double alpha = s.location_km / line.length_km;
                if (!(alpha > 0.0 && alpha < 1.0))
                    throw SimError("scenario " + std::to_string(s.id) +
                                   ": internal fault location must lie strictly inside the line");
            } else {
                any_external = true;
            }
            faults.push_back(s);
        } else {
            losses.push_back(s);
        }
    }
    std::vector<FaultScenario> ordered = scenarios;
    std::sort(ordered.begin(), ordered.end(),
              [](const FaultScenario& a, const FaultScenario& b) {
                  return a.t_start < b.t_start;
              });
    for (size_t i = 1; i < ordered.size(); ++i)
        if (ordered[i].t_start < ordered[i - 1].t_end)
            throw SimError("scenarios " + std::to_string(ordered[i - 1].id) + " and " +
                           std::to_string(ordered[i].id) + " overlap in time");

    Simulator sim(line, left, right, dt, n_sections, any_external);

    const long steps = static_cast<long>(std::llround(t_end / dt)) + 1;
    Waveforms w;
    w.dt = dt;
    w.v_base = line.v_base();
    w.i_base = line.i_base();
    w.per_unit = false;
    w.t.resize(static_cast<size_t>(steps));
    w.currents.resize(steps, 8);
    w.voltages.resize(steps, 8);

    const FaultScenario* active = nullptr;
    Vec8 i8, v8;
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        sim.measure(i8, v8);
        w.t[static_cast<size_t>(k)] = t;
        w.currents.row(k) = i8.transpose();
        w.voltages.row(k) = v8.transpose();
        if (k + 1 == steps) break;

        if (active == nullptr) {
            for (const auto& f : faults) {
                if (t >= f.t_start - dt / 2 && t < f.t_start + dt / 2) {
                    sim.set_fault(f.fault_type, f.r_fault_ohm, f.location_km, f.internal);
                    active = &f;
                    break;
                }
            }
        } else if (t >= active->t_end - dt / 2) {
            sim.clear_fault();
            active = nullptr;
        }
        sim.step();
    }

    for (const auto& l : losses) w = inject_bad_data(w, l.channel, l.t_start, l.t_end);
    return w;
}

Waveforms add_noise(const Waveforms& w, double amplitude_pu, std::uint64_t seed) {
    if (amplitude_pu < 0.0) throw SimError("add_noise: amplitude must be >= 0");
    Waveforms out = w;
    if (amplitude_pu == 0.0) return out;

    const double ia = w.per_unit ? amplitude_pu : amplitude_pu * w.i_base;
    const double va = w.per_unit ? amplitude_pu : amplitude_pu * w.v_base;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (long k = 0; k < out.currents.rows(); ++k) {
        for (int c = 0; c < 8; ++c) out.currents(k, c) += ia * uni(rng);
        for (int c = 0; c < 8; ++c) {
            if (c == 3 || c == 7) continue; // vn pseudo measurements stay 0
            out.voltages(k, c) += va * uni(rng);
        }
    }
    return out;
}

Waveforms inject_bad_data(const Waveforms& w, int current_channel,
                          double t_start, double t_end) {
    if (current_channel < 0 || current_channel > 7)
        throw SimError("inject_bad_data: unsupported mode, only the eight current "
                       "channels can report loss");
    Waveforms out = w;
    for (long k = 0; k < out.currents.rows(); ++k) {
        const double t = out.t[static_cast<size_t>(k)];
        if (t >= t_start - w.dt / 4 && t < t_end - w.dt / 4)
            out.currents(k, current_channel) = 0.0;
    }
    return out;
}

Waveforms run_event_table(const LineParameters& line,
                          const SourceModel& left,
                          const SourceModel& right,
                          const std::vector<FaultScenario>& events,
                          double dt,
                          int n_sections,
                          double noise_pu,
                          std::uint64_t seed,
                          double t_end) {
    std::vector<FaultScenario> faults;
    std::vector<FaultScenario> losses;
    for (const auto& e : events)
        (e.kind == FaultScenario::Kind::Fault ? faults : losses).push_back(e);

    Waveforms w = simulate(faults, line, left, right, t_end, dt, n_sections);
    w = add_noise(w, noise_pu, seed);
    for (const auto& l : losses) w = inject_bad_data(w, l.channel, l.t_start, l.t_end);
    return w;
}

} // namespace tlfd
