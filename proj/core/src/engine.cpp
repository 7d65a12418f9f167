#include "tlfd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "tlfd/errors.hpp"

namespace tlfd {

Observer::Observer(const FilterDesign& design)
    : design_(&design),
      D_si_(design.D),
      C_si_(design.model.C),
      half_dt_(design.dt / 2.0),
      v_base_(design.v_base),
      i_base_(design.i_base) {
    const Mat12 M = design.model.A - design.D * design.model.C;
    P_lu_.compute(Mat12(Mat12::Identity() - half_dt_ * M));
    Q_ = Mat12::Identity() + half_dt_ * M;
    Tm_inv_ = design.Tm.partialPivLu().inverse();
    for (int i = 0; i < 8; ++i) {
        const double mu = design.assigned_continuous[static_cast<size_t>(i)];
        kappa_(i) = std::abs(std::complex<double>(-mu, kOmega0)) / i_base_;
    }
    kappa_ *= design.magnitude_gain;
}

ResidualFrame Observer::step(ObserverState& state, const Vec12& u12_pu,
                             const Vec8& y8_pu) const {
    if (!u12_pu.allFinite() || !y8_pu.allFinite())
        throw StreamError("non-finite measurement at sample " + std::to_string(state.k));

    const Vec12 u_si = design_->model.B * (u12_pu * i_base_);
    const Vec8 y_si = y8_pu * v_base_;
    if (!state.primed) {
        state.u_prev = u_si;
        state.y_prev = y_si;
        state.primed = true;
    }

    state.x_hat = P_lu_.solve(Q_ * state.x_hat + half_dt_ * (state.u_prev + u_si) +
                              half_dt_ * (D_si_ * (state.y_prev + y_si)));
    state.u_prev = u_si;
    state.y_prev = y_si;

    ResidualFrame f;
    f.t = static_cast<double>(state.k) * design_->dt;
    f.raw_residual = (y_si - C_si_ * state.x_hat) / v_base_;
    f.canonical_residual = Tm_inv_ * f.raw_residual;
    f.scaled_residual = kappa_.cwiseProduct(f.canonical_residual);
    ++state.k;
    return f;
}

std::string Diagnosis::verdict_name() const {
    switch (verdict) {
        case Verdict::None: return "none";
        case Verdict::Fault: return "fault";
        case Verdict::BadData: return "bad_data";
        case Verdict::Unclassified: return "unclassified";
    }
    return "?";
}

WindowStats window_stats(std::span<const ResidualFrame> window, double omega) {
    WindowStats s;
    const size_t W = window.size();
    if (W == 0) return s;
    s.t0 = window.front().t;
    s.t1 = window.back().t;
    for (int c = 0; c < 8; ++c) {
        double a = 0.0, b = 0.0, sq = 0.0, pk = 0.0;
        for (const auto& f : window) {
            const double x = f.scaled_residual(c);
            a += x * std::cos(omega * f.t);
            b += x * std::sin(omega * f.t);
            sq += x * x;
            pk = std::max(pk, std::abs(x));
        }
        a *= 2.0 / static_cast<double>(W);
        b *= 2.0 / static_cast<double>(W);
        s.fund[static_cast<size_t>(c)] = std::hypot(a, b);
        s.rms[static_cast<size_t>(c)] = std::sqrt(sq / static_cast<double>(W));
        s.peak[static_cast<size_t>(c)] = pk;
        s.phasor[static_cast<size_t>(c)] = {a, -b};
    }
    return s;
}

namespace {

constexpr std::array<int, 6> kPhaseChannels = {0, 1, 2, 4, 5, 6};
constexpr double kRelativeFloor = 0.1;  // channels below this share of the
                                        // strongest one are leakage
constexpr double kCorrGate = 0.9;

double phasor_corr(const WindowStats& s, int i, int j) {
    const auto pi = s.phasor[static_cast<size_t>(i)];
    const auto pj = s.phasor[static_cast<size_t>(j)];
    const double denom = std::abs(pi) * std::abs(pj);
    if (denom <= 0.0) return 0.0;
    return (pi * std::conj(pj)).real() / denom;
}

FaultType pair_type(int i, int j) {
    if (i == 0 && j == 1) return FaultType::AB;
    if (i == 1 && j == 2) return FaultType::BC;
    return FaultType::CA;
}

FaultType ground_type(int i) {
    return i == 0 ? FaultType::AG : (i == 1 ? FaultType::BG : FaultType::CG);
}

} // namespace

Diagnosis classify(std::span<const ResidualFrame> window,
                   double threshold_pu,
                   const FilterDesign& design) {
    Diagnosis d;
    if (window.size() < 2) {
        d.verdict = Diagnosis::Verdict::Unclassified;
        d.note = "window shorter than one cycle";
        return d;
    }
    const WindowStats s = window_stats(window);
    d.t_start = s.t0;
    d.t_end = s.t1;
    d.magnitudes = s.fund;
    d.magnitudes_rms = s.rms;
    d.magnitudes_max = s.peak;

    double strongest = 0.0;
    for (int c : kPhaseChannels)
        strongest = std::max(strongest, s.fund[static_cast<size_t>(c)]);
    const double eff = std::max(threshold_pu, kRelativeFloor * strongest);

    std::vector<int> up;
    for (int c : kPhaseChannels)
        if (s.fund[static_cast<size_t>(c)] > eff) up.push_back(c);

    auto has = [&up](int c) { return std::find(up.begin(), up.end(), c) != up.end(); };

    if (up.empty()) {
        d.verdict = Diagnosis::Verdict::None;
        return d;
    }
    if (up.size() == 6) {
        d.verdict = Diagnosis::Verdict::Fault;
        d.fault_type = FaultType::ABC;
    } else if (up.size() == 4) {
        int i = -1, j = -1;
        for (int a = 0; a < 3 && i < 0; ++a)
            for (int b = a + 1; b < 3; ++b)
                if (has(a) && has(b) && has(a + 4) && has(b + 4)) { i = a; j = b; break; }
        if (i >= 0 && phasor_corr(s, i, j) <= -kCorrGate &&
            phasor_corr(s, i + 4, j + 4) <= -kCorrGate) {
            d.verdict = Diagnosis::Verdict::Fault;
            d.fault_type = pair_type(i, j);
        } else {
            d.verdict = Diagnosis::Verdict::Unclassified;
            d.note = "four channels up without a phase-pair sign pattern";
            return d;
        }
    } else if (up.size() == 2 && up[0] + 4 == up[1]) {
        if (phasor_corr(s, up[0], up[1]) >= kCorrGate) {
            d.verdict = Diagnosis::Verdict::Fault;
            d.fault_type = ground_type(up[0]);
        } else {
            d.verdict = Diagnosis::Verdict::Unclassified;
            d.note = "terminal pair up without matching polarity";
            return d;
        }
    } else if (up.size() == 1) {
        d.verdict = Diagnosis::Verdict::BadData;
        d.channel = up[0];
        return d;
    } else {
        d.verdict = Diagnosis::Verdict::Unclassified;
        std::string chans;
        for (int c : up) chans += std::string(chans.empty() ? "" : ",") +
                                  kCurrentChannelNames[static_cast<size_t>(c)];
        d.note = "pattern {" + chans + "} matches no rule";
        return d;
    }

    const auto [alpha, km] = locate(s, d, threshold_pu, design.length_km);
    d.alpha = alpha;
    d.location_km = km;
    return d;
}

std::pair<double, double> locate(const WindowStats& stats,
                                 const Diagnosis& diagnosis,
                                 double threshold_pu,
                                 double length_km) {
    if (diagnosis.verdict != Diagnosis::Verdict::Fault)
        throw StreamError("locate: diagnosis is not a fault verdict");

    int n = 0;
    const auto ph = faulted_phases(diagnosis.fault_type, &n);
    double sum = 0.0;
    int used = 0;
    for (int k = 0; k < n; ++k) {
        const int i = ph[static_cast<size_t>(k)];
        const double mL = stats.fund[static_cast<size_t>(i)];
        const double mR = stats.fund[static_cast<size_t>(i + 4)];
        if (mL + mR <= threshold_pu) continue;
        sum += mR / (mL + mR);
        ++used;
    }
    if (used == 0)
        throw StreamError("locate: residual pair magnitudes below threshold");
    const double alpha = sum / used;
    return {alpha, alpha * length_km};
}

namespace {

bool same_verdict(const Diagnosis& a, const Diagnosis& b) {
    if (a.verdict != b.verdict) return false;
    if (a.verdict == Diagnosis::Verdict::Fault) return a.fault_type == b.fault_type;
    if (a.verdict == Diagnosis::Verdict::BadData) return a.channel == b.channel;
    return true;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::vector<Diagnosis> run_stream(const Waveforms& waveforms,
                                  const FilterDesign& design,
                                  double threshold_pu,
                                  std::vector<ResidualFrame>* frames_out,
                                  std::string* warning_out) {
    if (waveforms.currents.cols() != 8 || waveforms.voltages.cols() != 8)
        throw StreamError("waveform stream must carry 8 current and 8 voltage channels");
    const Waveforms w = waveforms.to_per_unit();
    if (std::abs(w.dt - design.dt) > 1e-12 * design.dt)
        throw StreamError("waveform sample interval does not match the design dt");

    const long W = std::lround(1.0 / (kNominalHz * design.dt));
    const long stride = std::max<long>(1, W / 2);
    const long N = w.samples();
    std::vector<Diagnosis> out;
    if (N < W) {
        if (warning_out) *warning_out = "stream shorter than one fundamental cycle";
        return out;
    }

    const Mat4 K = measurement_K();
    Observer obs(design);
    ObserverState st;
    std::vector<ResidualFrame> frames;
    frames.reserve(static_cast<size_t>(N));
    Vec12 u12 = Vec12::Zero();
    Vec8 y8;
    for (long k = 0; k < N; ++k) {
        u12.head<8>() = w.currents.row(k).transpose();
        y8.head<4>() = K * w.voltages.row(k).head<4>().transpose();
        y8.tail<4>() = K * w.voltages.row(k).tail<4>().transpose();
        frames.push_back(obs.step(st, u12, y8));
    }

    struct Run {
        Diagnosis rep;            // representative (strongest window)
        double strongest = -1.0;
        long count = 0;
        double t0 = 0.0, t1 = 0.0;
        std::vector<double> alphas;
    };
    std::optional<Run> run;

    auto flush = [&]() {
        if (!run) return;
        if (run->count >= 3 && run->rep.verdict != Diagnosis::Verdict::None) {
            Diagnosis d = run->rep;
            d.t_start = run->t0;
            d.t_end = run->t1;
            if (d.verdict == Diagnosis::Verdict::Fault) {
                std::vector<double> alphas = run->alphas;
                if (alphas.size() > 2) alphas.erase(alphas.begin(), alphas.begin() + 2);
                if (!alphas.empty()) {
                    d.alpha = median(alphas);
                    d.location_km = d.alpha * design.length_km;
                }
            }
            out.push_back(std::move(d));
        }
        run.reset();
    };

    for (long w0 = 0; w0 + W <= N; w0 += stride) {
        const std::span<const ResidualFrame> win(frames.data() + w0,
                                                 static_cast<size_t>(W));
        Diagnosis d = classify(win, threshold_pu, design);
        const double t0 = frames[static_cast<size_t>(w0)].t;
        const double t1 = frames[static_cast<size_t>(w0 + W - 1)].t;
        if (run && same_verdict(run->rep, d)) {
            run->count++;
            run->t1 = t1;
            if (d.verdict == Diagnosis::Verdict::Fault) run->alphas.push_back(d.alpha);
            double strongest = 0.0;
            for (int c : kPhaseChannels)
                strongest = std::max(strongest, d.magnitudes[static_cast<size_t>(c)]);
            if (strongest > run->strongest) {
                run->strongest = strongest;
                const double rt0 = run->t0, rt1 = run->t1;
                run->rep = d;
                run->t0 = rt0;
                run->t1 = rt1;
            }
        } else {
            flush();
            Run r;
            r.rep = d;
            r.count = 1;
            r.t0 = t0;
            r.t1 = t1;
            if (d.verdict == Diagnosis::Verdict::Fault) r.alphas.push_back(d.alpha);
            for (int c : kPhaseChannels)
                r.strongest = std::max(r.strongest, d.magnitudes[static_cast<size_t>(c)]);
            run = std::move(r);
        }
    }
    flush();

    if (frames_out) *frames_out = std::move(frames);
    return out;
}

} // namespace tlfd
