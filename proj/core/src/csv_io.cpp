#include "funnelsim/csv_io.hpp"

#include <cstdio>
#include <fstream>

namespace fsim {

namespace {

std::string fmt(double v) {
    if (v == 0.0) v = 0.0;  // normalize negative zero
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_status_comment(std::string& out, const TerminationInfo& term,
                           const std::string& prefix) {
    out += "# ";
    out += prefix;
    out += "status: ";
    out += status_name(term.status);
    out += " at t=";
    out += fmt(term.time);
    if (!term.reason.empty()) {
        out += ", reason: ";
        out += term.reason;
    }
    out += "\n";
}

void append_indexed(std::string& header, const std::string& base, int count) {
    for (int i = 1; i <= count; ++i) {
        header += ',';
        header += base;
        header += std::to_string(i);
    }
}

struct RunColumns {
    const RunResult* run;
    int phi_idx = 0, occ_idx = 1;

    Vec error_at(std::size_t j) const {
        const auto& traj = run->trajectory;
        return traj.states[j].segment(0, run->layout.m) -
               run->reference.eval(traj.times[j]);
    }
};

}  // namespace

std::string csv_text(const RunResult& r) {
    if (r.refused) {
        throw std::invalid_argument("csv_text: refused runs have no trajectory");
    }
    const int m = r.layout.m;
    const bool filter = r.controller == ControllerKind::kFilterFunnel;

    std::string out;
    out += "t";
    append_indexed(out, "y", m);
    append_indexed(out, "ydot", m);
    if (filter) {
        append_indexed(out, "xi", m);
    } else {
        append_indexed(out, "z1_", m);
        append_indexed(out, "z2_", m);
    }
    append_indexed(out, "u", m);
    append_indexed(out, "e", m);
    out += ",phi,funnel_radius,occupancy";
    out += filter ? ",theta_norm" : ",k0,k1,k2";
    out += "\n";

    const Trajectory& traj = r.trajectory;
    RunColumns cols{&r};
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
        const Vec& x = traj.states[j];
        out += fmt(traj.times[j]);
        for (int i = 0; i < 2 * m + r.layout.ctrl_dim; ++i) {
            out += ',';
            out += fmt(x[i]);
        }
        for (int i = 0; i < m; ++i) {
            out += ',';
            out += fmt(traj.inputs[j][i]);
        }
        const Vec e = cols.error_at(j);
        for (int i = 0; i < m; ++i) {
            out += ',';
            out += fmt(e[i]);
        }
        const Vec& diag = traj.diagnostics[j];
        const double phi = diag[cols.phi_idx];
        out += ',';
        out += fmt(phi);
        out += ',';
        if (phi != 0.0) out += fmt(1.0 / phi);  // empty cell: infinite radius
        out += ',';
        out += fmt(diag[cols.occ_idx]);
        for (Eigen::Index i = 2; i < diag.size(); ++i) {
            out += ',';
            out += fmt(diag[i]);
        }
        out += "\n";
    }

    if (!traj.completed()) {
        append_status_comment(out, traj.termination, "");
    }
    return out;
}

void write_csv(const RunResult& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
    out << csv_text(r);
    if (!out) throw std::runtime_error("write_csv: write failed for " + path.string());
}

std::string compare_csv_text(const CompareResult& c) {
    if (c.a.refused || c.b.refused) {
        throw std::invalid_argument("compare_csv_text: refused runs have no trajectory");
    }
    const int m = c.a.layout.m;
    std::string out = "t";
    append_indexed(out, "y_a", m);
    append_indexed(out, "u_a", m);
    append_indexed(out, "e_a", m);
    append_indexed(out, "y_b", m);
    append_indexed(out, "u_b", m);
    append_indexed(out, "e_b", m);
    out += ",phi,funnel_radius\n";

    RunColumns cols_a{&c.a};
    RunColumns cols_b{&c.b};
    const std::size_t n =
        std::min(c.a.trajectory.times.size(), c.b.trajectory.times.size());
    for (std::size_t j = 0; j < n; ++j) {
        out += fmt(c.a.trajectory.times[j]);
        const auto emit_side = [&](const RunResult& r, const RunColumns& cols) {
            for (int i = 0; i < m; ++i) {
                out += ',';
                out += fmt(r.trajectory.states[j][i]);
            }
            for (int i = 0; i < m; ++i) {
                out += ',';
                out += fmt(r.trajectory.inputs[j][i]);
            }
            const Vec e = cols.error_at(j);
            for (int i = 0; i < m; ++i) {
                out += ',';
                out += fmt(e[i]);
            }
        };
        emit_side(c.a, cols_a);
        emit_side(c.b, cols_b);
        const double phi = c.a.trajectory.diagnostics[j][cols_a.phi_idx];
        out += ',';
        out += fmt(phi);
        out += ',';
        if (phi != 0.0) out += fmt(1.0 / phi);
        out += "\n";
    }

    if (!c.a.trajectory.completed()) {
        append_status_comment(out, c.a.trajectory.termination, "a ");
    }
    if (!c.b.trajectory.completed()) {
        append_status_comment(out, c.b.trajectory.termination, "b ");
    }
    return out;
}

void write_compare_csv(const CompareResult& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_compare_csv: cannot open " + path.string());
    out << compare_csv_text(c);
    if (!out) throw std::runtime_error("write_compare_csv: write failed for " + path.string());
}

}  // namespace fsim
