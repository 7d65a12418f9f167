#include "tlfd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "tlfd/errors.hpp"

namespace tlfd {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e)
        throw IoError(what + ": '" + s + "' is not a number");
    return v;
}

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct KeyValueFile {
    std::map<std::string, std::vector<std::string>> kv; // key -> tokens
    std::vector<std::vector<std::string>> events;       // "event =" lines, tokenized

    static KeyValueFile parse(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path + "'");
        KeyValueFile f;
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw IoError(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key == "event")
                f.events.push_back(tokens(val));
            else
                f.kv[key] = tokens(val);
        }
        return f;
    }

    bool has(const std::string& k) const { return kv.count(k) > 0; }

    double number(const std::string& k) const {
        const auto it = kv.find(k);
        if (it == kv.end() || it->second.size() != 1)
            throw IoError("field '" + k + "' must hold one number");
        return parse_double(it->second[0], "field '" + k + "'");
    }

    double number_or(const std::string& k, double dflt) const {
        return has(k) ? number(k) : dflt;
    }

    std::vector<double> numbers(const std::string& k, size_t expect) const {
        const auto it = kv.find(k);
        if (it == kv.end())
            throw IoError("field '" + k + "' is missing");
        if (expect != 0 && it->second.size() != expect)
            throw IoError("field '" + k + "' must hold " + std::to_string(expect) +
                          " numbers, found " + std::to_string(it->second.size()));
        std::vector<double> out;
        out.reserve(it->second.size());
        for (const auto& t : it->second)
            out.push_back(parse_double(t, "field '" + k + "'"));
        return out;
    }
};

Mat4 mat4_from(const std::vector<double>& v) {
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<size_t>(4 * r + c)];
    return m;
}

std::string row_major(const Eigen::MatrixXd& m) {
    std::string out;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (!out.empty()) out += ' ';
            out += fmt_double(m(r, c));
        }
    return out;
}

Eigen::MatrixXd matrix_from(const std::vector<double>& v, Eigen::Index rows,
                            Eigen::Index cols, const std::string& what) {
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw IoError(what + ": expected " + std::to_string(rows * cols) + " numbers");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = v[static_cast<size_t>(r * cols + c)];
    return m;
}

FaultScenario parse_event(const std::vector<std::string>& tok) {
    if (tok.empty()) throw IoError("empty event line");
    FaultScenario s;
    if (tok[0] == "fault") {
        if (tok.size() != 8)
            throw IoError("fault event needs: fault <id> <t0> <t1> <type> <Rf_ohm> "
                          "<location_km> <internal|external>");
        s.kind = FaultScenario::Kind::Fault;
        s.id = static_cast<int>(parse_double(tok[1], "event id"));
        s.t_start = parse_double(tok[2], "event t0");
        s.t_end = parse_double(tok[3], "event t1");
        s.fault_type = fault_type_from_string(tok[4]);
        s.r_fault_ohm = parse_double(tok[5], "event Rf");
        s.location_km = parse_double(tok[6], "event location");
        if (tok[7] == "internal")
            s.internal = true;
        else if (tok[7] == "external")
            s.internal = false;
        else
            throw IoError("event " + tok[1] + ": expected 'internal' or 'external'");
        if (!(s.r_fault_ohm > 0.0))
            throw IoError("event " + tok[1] + ": fault resistance must be positive");
    } else if (tok[0] == "loss") {
        if (tok.size() != 5)
            throw IoError("loss event needs: loss <id> <t0> <t1> <channel>");
        s.kind = FaultScenario::Kind::CurrentLoss;
        s.id = static_cast<int>(parse_double(tok[1], "event id"));
        s.t_start = parse_double(tok[2], "event t0");
        s.t_end = parse_double(tok[3], "event t1");
        s.channel = current_channel_from_name(tok[4]);
        if (s.channel < 0) {
            for (const auto* vn : kVoltageChannelNames)
                if (tok[4] == vn)
                    throw IoError("event " + tok[1] + ": channel '" + tok[4] +
                                  "': unsupported mode, only current-channel loss "
                                  "is modeled");
            throw IoError("event " + tok[1] + ": unknown channel '" + tok[4] + "'");
        }
    } else {
        throw IoError("event kind '" + tok[0] + "' must be 'fault' or 'loss'");
    }
    if (!(s.t_start < s.t_end))
        throw IoError("event " + std::to_string(s.id) + ": t_start must precede t_end");
    return s;
}

} // namespace

RunConfig load_config(const std::string& path) {
    const KeyValueFile f = KeyValueFile::parse(path);

    static const char* kRequired[] = {"R_ohm", "L_H",       "C_uF",
                                      "length_km", "v_rated_V", "i_rated_A"};
    std::string missing;
    for (const char* k : kRequired)
        if (!f.has(k)) missing += std::string(missing.empty() ? "" : ", ") + k;
    if (!missing.empty())
        throw IoError("config '" + path + "' is missing required fields: " + missing);

    RunConfig cfg;
    cfg.line.R = mat4_from(f.numbers("R_ohm", 16));
    cfg.line.L = mat4_from(f.numbers("L_H", 16));
    cfg.line.Cap = mat4_from(f.numbers("C_uF", 16)) * 1e-6;
    cfg.line.length_km = f.number("length_km");
    cfg.line.v_rated = f.number("v_rated_V");
    cfg.line.i_rated = f.number("i_rated_A");
    try {
        cfg.line.validate();
    } catch (const ModelError& e) {
        throw IoError("config '" + path + "': " + e.what());
    }

    cfg.dt = f.number_or("dt_s", 1e-4);
    if (!(cfg.dt > 0.0)) throw IoError("field 'dt_s' must be positive");
    cfg.n_sections = static_cast<int>(f.number_or("n_sections", 16));
    if (cfg.n_sections < 1) throw IoError("field 'n_sections' must be >= 1");

    const double v_pu = f.number_or("src_v_pu", 1.0);
    const double diff = f.number_or("src_angle_diff_deg", 10.0) * kTwoPi / 360.0;
    const double rs = f.number_or("src_R_ohm", 1.0);
    const double ls = f.number_or("src_L_H", 10e-3);
    if (!(v_pu > 0.0)) throw IoError("field 'src_v_pu' must be positive");
    if (rs < 0.0 || ls < 0.0)
        throw IoError("fields 'src_R_ohm'/'src_L_H' must be non-negative");
    cfg.source_left = {v_pu, 0.0, rs, ls};
    cfg.source_right = {v_pu, -diff, rs, ls};

    if (f.has("lambda")) {
        cfg.lambda = f.numbers("lambda", 0);
        if (cfg.lambda.size() != 1 && cfg.lambda.size() != 8)
            throw IoError("field 'lambda' must hold 1 or 8 values");
        for (double l : cfg.lambda)
            if (!(std::abs(l) < 1.0))
                throw IoError("field 'lambda': eigenvalue " + fmt_double(l) +
                              " must satisfy |lambda| < 1");
    } else {
        cfg.lambda = {0.1};
    }
    cfg.threshold_pu = f.number_or("threshold_pu", 0.02);
    if (!(cfg.threshold_pu > 0.0)) throw IoError("field 'threshold_pu' must be positive");
    cfg.noise_pu = f.number_or("noise_pu", 0.02);
    if (cfg.noise_pu < 0.0) throw IoError("field 'noise_pu' must be >= 0");
    cfg.magnitude_gain = f.number_or("magnitude_gain", 1.5);
    if (!(cfg.magnitude_gain > 0.0)) throw IoError("field 'magnitude_gain' must be positive");
    cfg.seed = static_cast<std::uint64_t>(f.number_or("seed", 7));
    cfg.t_end = f.number_or("t_end_s", 6.4);
    if (!(cfg.t_end > 0.0)) throw IoError("field 't_end_s' must be positive");

    for (const auto& ev : f.events) {
        FaultScenario s = parse_event(ev);
        if (s.kind == FaultScenario::Kind::Fault && s.internal) {
            if (s.location_km < 0.0 || s.location_km > cfg.line.length_km)
                throw IoError("event " + std::to_string(s.id) +
                              ": internal fault location outside [0, length]");
        }
        cfg.events.push_back(s);
    }
    return cfg;
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "# generated configuration\n";
    out << "R_ohm = " << row_major(cfg.line.R) << "\n";
    out << "L_H = " << row_major(cfg.line.L) << "\n";
    out << "C_uF = " << row_major(cfg.line.Cap * 1e6) << "\n";
    out << "length_km = " << fmt_double(cfg.line.length_km) << "\n";
    out << "v_rated_V = " << fmt_double(cfg.line.v_rated) << "\n";
    out << "i_rated_A = " << fmt_double(cfg.line.i_rated) << "\n";
    out << "dt_s = " << fmt_double(cfg.dt) << "\n";
    out << "n_sections = " << cfg.n_sections << "\n";
    out << "src_v_pu = " << fmt_double(cfg.source_left.v_pu) << "\n";
    out << "src_angle_diff_deg = "
        << fmt_double(-cfg.source_right.angle_rad * 360.0 / kTwoPi) << "\n";
    out << "src_R_ohm = " << fmt_double(cfg.source_left.R_s) << "\n";
    out << "src_L_H = " << fmt_double(cfg.source_left.L_s) << "\n";
    out << "lambda =";
    for (double l : cfg.lambda) out << " " << fmt_double(l);
    out << "\n";
    out << "threshold_pu = " << fmt_double(cfg.threshold_pu) << "\n";
    out << "noise_pu = " << fmt_double(cfg.noise_pu) << "\n";
    out << "magnitude_gain = " << fmt_double(cfg.magnitude_gain) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "t_end_s = " << fmt_double(cfg.t_end) << "\n";
    for (const auto& e : cfg.events) {
        if (e.kind == FaultScenario::Kind::Fault)
            out << "event = fault " << e.id << " " << fmt_double(e.t_start) << " "
                << fmt_double(e.t_end) << " " << to_string(e.fault_type) << " "
                << fmt_double(e.r_fault_ohm) << " " << fmt_double(e.location_km) << " "
                << (e.internal ? "internal" : "external") << "\n";
        else
            out << "event = loss " << e.id << " " << fmt_double(e.t_start) << " "
                << fmt_double(e.t_end) << " "
                << kCurrentChannelNames[static_cast<size_t>(e.channel)] << "\n";
    }
}

void write_waveforms(const Waveforms& w, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write '" + csv_path + "'");
    out << "t";
    for (const auto* c : kCurrentChannelNames) out << "," << c;
    for (const auto* c : kVoltageChannelNames) out << "," << c;
    out << "\n";
    std::string line;
    for (long k = 0; k < w.samples(); ++k) {
        line.clear();
        line += fmt_double(w.t[static_cast<size_t>(k)]);
        for (int c = 0; c < 8; ++c) line += "," + fmt_double(w.currents(k, c));
        for (int c = 0; c < 8; ++c) line += "," + fmt_double(w.voltages(k, c));
        line += "\n";
        out << line;
    }

    json meta;
    meta["format"] = "tlfd-waveforms-v1";
    meta["dt_s"] = w.dt;
    meta["samples"] = w.samples();
    meta["v_base_V"] = w.v_base;
    meta["i_base_A"] = w.i_base;
    meta["per_unit"] = w.per_unit;
    meta["channels"] = json::array();
    for (const auto* c : kCurrentChannelNames) meta["channels"].push_back(c);
    for (const auto* c : kVoltageChannelNames) meta["channels"].push_back(c);
    std::ofstream mo(csv_path + ".meta.json");
    if (!mo) throw IoError("cannot write '" + csv_path + ".meta.json'");
    mo << meta.dump(2) << "\n";
}

Waveforms read_waveforms(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open '" + csv_path + "'");

    Waveforms w;
    {
        std::ifstream mi(csv_path + ".meta.json");
        if (!mi)
            throw IoError("cannot open sidecar '" + csv_path + ".meta.json'");
        json meta = json::parse(mi, nullptr, false);
        if (meta.is_discarded())
            throw IoError("sidecar '" + csv_path + ".meta.json' is not valid JSON");
        w.dt = meta.at("dt_s").get<double>();
        w.v_base = meta.at("v_base_V").get<double>();
        w.i_base = meta.at("i_base_A").get<double>();
        w.per_unit = meta.value("per_unit", false);
    }

    std::string header;
    if (!std::getline(in, header)) throw IoError("'" + csv_path + "' is empty");
    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(trim(c));
    }
    std::vector<std::string> expected = {"t"};
    for (const auto* c : kCurrentChannelNames) expected.emplace_back(c);
    for (const auto* c : kVoltageChannelNames) expected.emplace_back(c);
    for (const auto& e : expected)
        if (std::find(cols.begin(), cols.end(), e) == cols.end())
            throw IoError("'" + csv_path + "' is missing channel '" + e + "'");
    std::vector<int> colmap(expected.size());
    for (size_t i = 0; i < expected.size(); ++i)
        colmap[i] = static_cast<int>(
            std::find(cols.begin(), cols.end(), expected[i]) - cols.begin());

    std::vector<std::array<double, 17>> rows;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::array<double, 17> vals{};
        size_t start = 0;
        std::vector<double> raw;
        raw.reserve(cols.size());
        while (start <= line.size()) {
            const size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? std::string::npos
                                                              : comma - start);
            raw.push_back(parse_double(trim(cell), "'" + csv_path + "' row " +
                                                       std::to_string(lineno)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (raw.size() != cols.size())
            throw IoError("'" + csv_path + "' row " + std::to_string(lineno) +
                          ": expected " + std::to_string(cols.size()) + " cells");
        for (size_t i = 0; i < expected.size(); ++i)
            vals[i] = raw[static_cast<size_t>(colmap[i])];
        if (!rows.empty() && vals[0] <= rows.back()[0])
            throw IoError("'" + csv_path + "' row " + std::to_string(lineno) +
                          ": time is not strictly increasing");
        rows.push_back(vals);
    }

    const long n = static_cast<long>(rows.size());
    w.t.resize(rows.size());
    w.currents.resize(n, 8);
    w.voltages.resize(n, 8);
    for (long k = 0; k < n; ++k) {
        const auto& r = rows[static_cast<size_t>(k)];
        w.t[static_cast<size_t>(k)] = r[0];
        for (int c = 0; c < 8; ++c) w.currents(k, c) = r[static_cast<size_t>(1 + c)];
        for (int c = 0; c < 8; ++c) w.voltages(k, c) = r[static_cast<size_t>(9 + c)];
    }
    return w;
}

void save_design(const FilterDesign& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "format = tlfd-design-v1\n";
    out << "dt_s = " << fmt_double(d.dt) << "\n";
    out << "v_base_V = " << fmt_double(d.v_base) << "\n";
    out << "i_base_A = " << fmt_double(d.i_base) << "\n";
    out << "length_km = " << fmt_double(d.length_km) << "\n";
    out << "threshold_pu = " << fmt_double(d.threshold_pu) << "\n";
    out << "magnitude_gain = " << fmt_double(d.magnitude_gain) << "\n";
    out << "lambda_discrete =";
    for (double l : d.assigned_eigenvalues) out << " " << fmt_double(l);
    out << "\n";
    out << "lambda_continuous =";
    for (double l : d.assigned_continuous) out << " " << fmt_double(l);
    out << "\n";
    out << "unassignable =";
    for (const auto& u : d.unassignable_eigenvalues)
        out << " " << fmt_double(u.real()) << " " << fmt_double(u.imag());
    out << "\n";
    out << "A = " << row_major(d.model.A) << "\n";
    out << "B = " << row_major(d.model.B) << "\n";
    out << "C = " << row_major(d.model.C) << "\n";
    out << "Ad = " << row_major(d.model_discrete.A) << "\n";
    out << "Bd = " << row_major(d.model_discrete.B) << "\n";
    out << "D = " << row_major(d.D) << "\n";
    out << "T = " << row_major(d.T) << "\n";
    out << "Tm = " << row_major(d.Tm) << "\n";
    out << "generators = " << row_major(d.generators) << "\n";
    out << "excess = " << row_major(d.excess_basis) << "\n";
}

FilterDesign load_design(const std::string& path) {
    const KeyValueFile f = KeyValueFile::parse(path);
    const auto it = f.kv.find("format");
    if (it == f.kv.end() || it->second != std::vector<std::string>{"tlfd-design-v1"})
        throw IoError("'" + path + "' is not a tlfd-design-v1 file");

    FilterDesign d;
    d.dt = f.number("dt_s");
    d.v_base = f.number("v_base_V");
    d.i_base = f.number("i_base_A");
    d.length_km = f.number("length_km");
    d.threshold_pu = f.number("threshold_pu");
    d.magnitude_gain = f.number("magnitude_gain");
    d.assigned_eigenvalues = f.numbers("lambda_discrete", 8);
    d.assigned_continuous = f.numbers("lambda_continuous", 8);
    const auto un = f.numbers("unassignable", 8);
    for (int i = 0; i < 4; ++i)
        d.unassignable_eigenvalues.emplace_back(un[static_cast<size_t>(2 * i)],
                                                un[static_cast<size_t>(2 * i + 1)]);
    d.model.A = matrix_from(f.numbers("A", 144), 12, 12, "A");
    d.model.B = matrix_from(f.numbers("B", 144), 12, 12, "B");
    d.model.C = matrix_from(f.numbers("C", 96), 8, 12, "C");
    d.model.time = StateSpaceModel::Time::Continuous;
    d.model_discrete = d.model;
    d.model_discrete.A = matrix_from(f.numbers("Ad", 144), 12, 12, "Ad");
    d.model_discrete.B = matrix_from(f.numbers("Bd", 144), 12, 12, "Bd");
    d.model_discrete.time = StateSpaceModel::Time::Discrete;
    d.model_discrete.dt = d.dt;
    d.D = matrix_from(f.numbers("D", 96), 12, 8, "D");
    d.T = matrix_from(f.numbers("T", 144), 12, 12, "T");
    d.Tm = matrix_from(f.numbers("Tm", 64), 8, 8, "Tm");
    d.generators = matrix_from(f.numbers("generators", 96), 12, 8, "generators");
    d.excess_basis = matrix_from(f.numbers("excess", 48), 12, 4, "excess");
    return d;
}

namespace {

json diagnosis_to_json(const Diagnosis& d) {
    json j;
    j["t_start"] = d.t_start;
    j["t_end"] = d.t_end;
    j["verdict"] = d.verdict_name();
    if (d.verdict == Diagnosis::Verdict::Fault) {
        j["fault_type"] = to_string(d.fault_type);
        j["alpha"] = d.alpha;
        j["location_km"] = d.location_km;
    }
    if (d.verdict == Diagnosis::Verdict::BadData)
        j["channel"] = kCurrentChannelNames[static_cast<size_t>(d.channel)];
    j["magnitudes"] = d.magnitudes;
    j["magnitudes_rms"] = d.magnitudes_rms;
    j["magnitudes_max"] = d.magnitudes_max;
    if (!d.note.empty()) j["note"] = d.note;
    return j;
}

Diagnosis diagnosis_from_json(const json& j) {
    Diagnosis d;
    const std::string v = j.at("verdict").get<std::string>();
    if (v == "none") d.verdict = Diagnosis::Verdict::None;
    else if (v == "fault") d.verdict = Diagnosis::Verdict::Fault;
    else if (v == "bad_data") d.verdict = Diagnosis::Verdict::BadData;
    else if (v == "unclassified") d.verdict = Diagnosis::Verdict::Unclassified;
    else throw IoError("unknown verdict '" + v + "'");
    d.t_start = j.at("t_start").get<double>();
    d.t_end = j.at("t_end").get<double>();
    if (d.verdict == Diagnosis::Verdict::Fault) {
        d.fault_type = fault_type_from_string(j.at("fault_type").get<std::string>());
        d.alpha = j.at("alpha").get<double>();
        d.location_km = j.at("location_km").get<double>();
    }
    if (d.verdict == Diagnosis::Verdict::BadData)
        d.channel = current_channel_from_name(j.at("channel").get<std::string>());
    const auto mags = j.at("magnitudes");
    for (int i = 0; i < 8; ++i) d.magnitudes[static_cast<size_t>(i)] = mags.at(i);
    if (j.contains("magnitudes_rms"))
        for (int i = 0; i < 8; ++i)
            d.magnitudes_rms[static_cast<size_t>(i)] = j["magnitudes_rms"].at(i);
    if (j.contains("magnitudes_max"))
        for (int i = 0; i < 8; ++i)
            d.magnitudes_max[static_cast<size_t>(i)] = j["magnitudes_max"].at(i);
    if (j.contains("note")) d.note = j["note"].get<std::string>();
    return d;
}

} // namespace

void write_diagnoses(const std::vector<Diagnosis>& diags, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& d : diags) out << diagnosis_to_json(d).dump() << "\n";
}

std::vector<Diagnosis> read_diagnoses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<Diagnosis> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw IoError("'" + path + "' line " + std::to_string(lineno) +
                          ": invalid JSON");
        out.push_back(diagnosis_from_json(j));
    }
    return out;
}

std::vector<std::string> validate_diagnosis_file(const std::string& path) {
    std::vector<std::string> problems;
    std::ifstream in(path);
    if (!in) {
        problems.push_back("cannot open '" + path + "'");
        return problems;
    }
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string at = "line " + std::to_string(lineno) + ": ";
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            problems.push_back(at + "invalid JSON");
            continue;
        }
        try {
            const Diagnosis d = diagnosis_from_json(j);
            if (d.verdict == Diagnosis::Verdict::Fault) {
                if (!(d.alpha > 0.0 && d.alpha < 1.0))
                    problems.push_back(at + "fault alpha outside (0,1)");
                if (std::abs(d.location_km) > 1e7)
                    problems.push_back(at + "implausible location");
            }
            if (d.verdict == Diagnosis::Verdict::BadData && d.channel < 0)
                problems.push_back(at + "bad_data verdict without a valid channel");
            if (!(d.t_start <= d.t_end))
                problems.push_back(at + "t_start after t_end");
        } catch (const std::exception& e) {
            problems.push_back(at + e.what());
        }
    }
    return problems;
}

void write_residuals(const std::vector<ResidualFrame>& frames, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "t";
    for (int i = 1; i <= 8; ++i) out << ",r" << i;
    for (int i = 1; i <= 8; ++i) out << ",raw" << i;
    out << "\n";
    std::string line;
    for (const auto& f : frames) {
        line.clear();
        line += fmt_double(f.t);
        for (int c = 0; c < 8; ++c) line += "," + fmt_double(f.scaled_residual(c));
        for (int c = 0; c < 8; ++c) line += "," + fmt_double(f.raw_residual(c));
        line += "\n";
        out << line;
    }
}

std::vector<ResidualFrame> read_residuals(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw IoError("'" + path + "' is empty");
    std::vector<ResidualFrame> out;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> vals;
        size_t start = 0;
        while (start <= line.size()) {
            const size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? std::string::npos
                                                              : comma - start);
            vals.push_back(parse_double(trim(cell), "'" + path + "' row " +
                                                        std::to_string(lineno)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (vals.size() != 17)
            throw IoError("'" + path + "' row " + std::to_string(lineno) +
                          ": expected 17 cells");
        ResidualFrame f;
        f.t = vals[0];
        for (int c = 0; c < 8; ++c) f.scaled_residual(c) = vals[static_cast<size_t>(1 + c)];
        for (int c = 0; c < 8; ++c) f.raw_residual(c) = vals[static_cast<size_t>(9 + c)];
        out.push_back(f);
    }
    return out;
}

} // namespace tlfd
