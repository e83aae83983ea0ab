#include "funnelsim/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace fsim {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v == 0.0 ? 0.0 : v);
    return buf;
}

double nice_step(double range) {
    if (!(range > 0.0)) return 1.0;
    const double raw = range / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (const double f : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= f * mag * (1.0 + 1e-12)) return f * mag;
    }
    return 10.0 * mag;
}

struct Series {
    std::string label;
    std::string color;
    const std::vector<double>* t = nullptr;
    std::vector<double> v;
};

struct Panel {
    double x0 = 0.0, y0 = 0.0, w = 0.0, h = 0.0;
    double tmin = 0.0, tmax = 1.0, vmin = -1.0, vmax = 1.0;

    double px(double t) const { return x0 + (t - tmin) / (tmax - tmin) * w; }
    double py(double v) const { return y0 + h - (v - vmin) / (vmax - vmin) * h; }
};

void emit_axes(std::string& out, const Panel& p, const std::string& title) {
    out += "<rect x=\"" + num(p.x0) + "\" y=\"" + num(p.y0) + "\" width=\"" + num(p.w) +
           "\" height=\"" + num(p.h) + "\" fill=\"none\" stroke=\"#444444\"/>\n";
    out += "<text x=\"" + num(p.x0) + "\" y=\"" + num(p.y0 - 8.0) +
           "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#222222\">" + title +
           "</text>\n";

    const double tv = nice_step(p.tmax - p.tmin);
    for (double t = std::ceil(p.tmin / tv) * tv; t <= p.tmax + 1e-9 * tv; t += tv) {
        const double x = p.px(t);
        out += "<line x1=\"" + num(x) + "\" y1=\"" + num(p.y0) + "\" x2=\"" + num(x) +
               "\" y2=\"" + num(p.y0 + p.h) + "\" stroke=\"#e0e0e0\" stroke-width=\"0.6\"/>\n";
        out += "<text x=\"" + num(x) + "\" y=\"" + num(p.y0 + p.h + 16.0) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444444\" "
               "text-anchor=\"middle\">" +
               tick_label(t) + "</text>\n";
    }
    const double vv = nice_step(p.vmax - p.vmin);
    for (double v = std::ceil(p.vmin / vv) * vv; v <= p.vmax + 1e-9 * vv; v += vv) {
        const double y = p.py(v);
        out += "<line x1=\"" + num(p.x0) + "\" y1=\"" + num(y) + "\" x2=\"" +
               num(p.x0 + p.w) + "\" y2=\"" + num(y) +
               "\" stroke=\"#e0e0e0\" stroke-width=\"0.6\"/>\n";
        out += "<text x=\"" + num(p.x0 - 6.0) + "\" y=\"" + num(y + 4.0) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444444\" "
               "text-anchor=\"end\">" +
               tick_label(v) + "</text>\n";
    }
}

void emit_polyline(std::string& out, const Panel& p, const std::vector<double>& t,
                   const std::vector<double>& v, const std::string& color, double width,
                   const std::string& clip, const std::string& dash = "") {
    if (t.empty()) return;
    out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(width) +
           "\"" + (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") +
           " clip-path=\"url(#" + clip + ")\" points=\"";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0) out += ' ';
        out += num(p.px(t[i])) + "," + num(p.py(v[i]));
    }
    out += "\"/>\n";
}

/// Shaded admissible region between +radius and -radius (or 0..+radius when
/// one-sided); infinite radii are clamped far outside the clip rect.
void emit_funnel_region(std::string& out, const Panel& p, const std::vector<double>& t,
                        const std::vector<double>& radius, bool signed_region,
                        const std::string& clip) {
    if (t.empty()) return;
    const double big = 10.0 * std::max(std::abs(p.vmax), std::abs(p.vmin)) + 1.0;
    const auto clamp_radius = [&](double r) { return std::isfinite(r) ? std::min(r, big) : big; };

    out += "<polygon fill=\"#c8c8c8\" fill-opacity=\"0.45\" stroke=\"none\" clip-path=\"url(#" +
           clip + ")\" points=\"";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0) out += ' ';
        out += num(p.px(t[i])) + "," + num(p.py(clamp_radius(radius[i])));
    }
    for (std::size_t i = t.size(); i-- > 0;) {
        out += ' ';
        const double lower = signed_region ? -clamp_radius(radius[i]) : 0.0;
        out += num(p.px(t[i])) + "," + num(p.py(lower));
    }
    out += "\"/>\n";

    std::vector<double> upper(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) upper[i] = clamp_radius(radius[i]);
    emit_polyline(out, p, t, upper, "#808080", 1.0, clip, "4,3");
    if (signed_region) {
        std::vector<double> lower(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) lower[i] = -upper[i];
        emit_polyline(out, p, t, lower, "#808080", 1.0, clip, "4,3");
    }
}

void emit_breach_marker(std::string& out, const Panel& p, double t_breach,
                        const std::string& text) {
    if (t_breach < p.tmin || t_breach > p.tmax) return;
    const double x = p.px(t_breach);
    out += "<line x1=\"" + num(x) + "\" y1=\"" + num(p.y0) + "\" x2=\"" + num(x) + "\" y2=\"" +
           num(p.y0 + p.h) +
           "\" stroke=\"#d62728\" stroke-width=\"1.4\" stroke-dasharray=\"6,3\"/>\n";
    out += "<text x=\"" + num(x + 4.0) + "\" y=\"" + num(p.y0 + 14.0) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">" + text +
           "</text>\n";
}

void emit_legend(std::string& out, const Panel& p, const std::vector<Series>& series,
                 bool with_funnel_entry) {
    double y = p.y0 + 16.0;
    const double x = p.x0 + p.w - 180.0;
    for (const auto& s : series) {
        out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4.0) + "\" x2=\"" +
               num(x + 24.0) + "\" y2=\"" + num(y - 4.0) + "\" stroke=\"" + s.color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + num(x + 30.0) + "\" y=\"" + num(y) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222222\">" + s.label +
               "</text>\n";
        y += 16.0;
    }
    if (with_funnel_entry) {
        out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4.0) + "\" x2=\"" +
               num(x + 24.0) + "\" y2=\"" + num(y - 4.0) +
               "\" stroke=\"#808080\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\"/>\n";
        out += "<text x=\"" + num(x + 30.0) + "\" y=\"" + num(y) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222222\">funnel boundary "
               "&#177;1/&#966;</text>\n";
    }
}

struct RunSeries {
    std::vector<double> t;
    std::vector<double> e;  // signed for m == 1, norm otherwise
    std::vector<double> u;
    std::vector<double> radius;  // +inf where phi == 0
    bool scalar = true;
    std::string label;
};

RunSeries extract(const RunResult& r) {
    RunSeries s;
    s.scalar = r.layout.m == 1;
    s.label = r.label.empty()
                  ? (r.controller == ControllerKind::kFilterFunnel ? "filter funnel"
                                                                   : "comparison")
                  : r.label;
    const Trajectory& traj = r.trajectory;
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
        const double t = traj.times[j];
        s.t.push_back(t);
        const Vec e = traj.states[j].segment(0, r.layout.m) - r.reference.eval(t);
        s.e.push_back(s.scalar ? e[0] : e.norm());
        s.u.push_back(s.scalar ? traj.inputs[j][0] : traj.inputs[j].norm());
        const double phi = traj.diagnostics[j][0];
        s.radius.push_back(phi > 0.0 ? 1.0 / phi : std::numeric_limits<double>::infinity());
    }
    return s;
}

std::string render(const std::vector<const RunResult*>& runs) {
    const double width = 880.0, height = 640.0;
    const double left = 70.0, right = 24.0, top = 34.0, bottom = 46.0, gap = 56.0;
    const double panel_h = (height - top - bottom - gap) / 2.0;

    std::vector<RunSeries> series;
    series.reserve(runs.size());
    for (const RunResult* r : runs) series.push_back(extract(*r));

    const bool scalar = series.front().scalar;
    double tmax = 1.0, abs_e = 0.0, abs_u = 0.0;
    double r_min = std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        for (std::size_t j = 0; j < s.t.size(); ++j) {
            tmax = std::max(tmax, s.t[j]);
            abs_e = std::max(abs_e, std::abs(s.e[j]));
            abs_u = std::max(abs_u, std::abs(s.u[j]));
            if (std::isfinite(s.radius[j])) r_min = std::min(r_min, s.radius[j]);
        }
    }
    double e_lim = 1.25 * std::max(abs_e, std::isfinite(r_min) ? r_min : 0.0);
    if (!(e_lim > 0.0)) e_lim = 1.0;
    double u_lim = 1.25 * abs_u;
    if (!(u_lim > 0.0)) u_lim = 1.0;

    Panel err_panel{left, top, width - left - right, panel_h,
                    0.0,  tmax, scalar ? -e_lim : 0.0, e_lim};
    Panel u_panel{left, top + panel_h + gap, width - left - right, panel_h,
                  0.0,  tmax, scalar ? -u_lim : 0.0, u_lim};

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    out += "<rect width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" fill=\"#ffffff\"/>\n";
    out += "<defs>\n<clipPath id=\"clip_err\"><rect x=\"" + num(err_panel.x0) + "\" y=\"" +
           num(err_panel.y0) + "\" width=\"" + num(err_panel.w) + "\" height=\"" +
           num(err_panel.h) + "\"/></clipPath>\n<clipPath id=\"clip_u\"><rect x=\"" +
           num(u_panel.x0) + "\" y=\"" + num(u_panel.y0) + "\" width=\"" + num(u_panel.w) +
           "\" height=\"" + num(u_panel.h) + "\"/></clipPath>\n</defs>\n";

    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"};

    // Error panel: funnel region from the first run's funnel, then all errors.
    emit_funnel_region(out, err_panel, series.front().t, series.front().radius, scalar,
                       "clip_err");
    std::vector<Series> legend_entries;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::string color = kColors[i % 4];
        emit_polyline(out, err_panel, series[i].t, series[i].e, color, 1.6, "clip_err");
        legend_entries.push_back(Series{series[i].label, color, nullptr, {}});
    }
    emit_axes(out, err_panel,
              scalar ? "tracking error e(t) with funnel boundary"
                     : "tracking error ||e(t)|| with funnel boundary");
    emit_legend(out, err_panel, legend_entries, true);

    for (std::size_t i = 0; i < series.size(); ++i) {
        emit_polyline(out, u_panel, series[i].t, series[i].u, kColors[i % 4], 1.6, "clip_u");
    }
    emit_axes(out, u_panel, scalar ? "control input u(t)" : "control input ||u(t)||");
    emit_legend(out, u_panel, legend_entries, false);

    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& term = runs[i]->trajectory.termination;
        if (term.status != RunStatus::kCompleted) {
            emit_breach_marker(out, err_panel, term.time, status_name(term.status));
            emit_breach_marker(out, u_panel, term.time, status_name(term.status));
        }
    }

    out += "<text x=\"" + num(left) + "\" y=\"" + num(height - 12.0) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#666666\">t [s]</text>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace

std::string svg_text(const RunResult& r) {
    if (r.refused) throw std::invalid_argument("svg_text: refused runs have no trajectory");
    return render({&r});
}

void write_svg(const RunResult& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_svg: cannot open " + path.string());
    out << svg_text(r);
    if (!out) throw std::runtime_error("write_svg: write failed for " + path.string());
}

std::string svg_pair_text(const RunResult& a, const RunResult& b) {
    if (a.refused || b.refused) {
        throw std::invalid_argument("svg_pair_text: refused runs have no trajectory");
    }
    return render({&a, &b});
}

void write_svg_pair(const RunResult& a, const RunResult& b,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_svg_pair: cannot open " + path.string());
    out << svg_pair_text(a, b);
    if (!out) throw std::runtime_error("write_svg_pair: write failed for " + path.string());
}

}  // namespace fsim
