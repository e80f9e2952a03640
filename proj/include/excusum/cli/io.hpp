#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "excusum/conditions.hpp"
#include "excusum/metrics.hpp"

namespace excusum::cli {

using nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::monostate, double, std::int64_t, std::uint64_t, std::string>;

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

inline std::string format_cell(const Cell& cell) {
    struct Visitor {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(double v) const { return format_real(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(std::uint64_t v) const { return std::to_string(v); }
        std::string operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, cell);
}

inline json cell_to_json(const Cell& cell) {
    struct Visitor {
        json operator()(std::monostate) const { return nullptr; }
        json operator()(double v) const { return std::isfinite(v) ? json(v) : json(format_real(v)); }
        json operator()(std::int64_t v) const { return v; }
        json operator()(std::uint64_t v) const { return v; }
        json operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, cell);
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::string to_csv() const {
        std::ostringstream out;
        for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_cell(row[c]);
            out << '\n';
        }
        return out.str();
    }

    json to_json() const {
        json arr = json::array();
        for (const auto& row : rows) {
            json obj = json::object();
            for (std::size_t c = 0; c < columns.size(); ++c) obj[columns[c]] = cell_to_json(row[c]);
            arr.push_back(std::move(obj));
        }
        return arr;
    }
};

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << contents;
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Writes `<stem>.csv` or `<stem>.json` into `dir`; returns the path written.
inline std::filesystem::path write_table(const std::filesystem::path& dir, const std::string& stem,
                                         const Table& table, const std::string& format) {
    if (format == "json") {
        auto path = dir / (stem + ".json");
        write_file(path, table.to_json().dump(2) + "\n");
        return path;
    }
    auto path = dir / (stem + ".csv");
    write_file(path, table.to_csv());
    return path;
}

// ---------------------------------------------------------------------------
// SVG line chart

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string colour = "#1f77b4";
    bool dashed = false;
    bool markers = false;
};

struct Guide {
    double value = 0.0;
    std::string label;
    std::string colour = "#d62728";
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<Guide> horizontal;
    std::vector<Guide> vertical;
    int width = 720;
    int height = 420;

    std::string render() const;
};

namespace detail {

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fixed(double v, int digits = 2) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

inline std::string tick_label(double v) {
    std::ostringstream out;
    out << std::setprecision(4) << v;
    return out.str();
}

// "Nice" tick spacing covering [lo, hi] with about `count` intervals.
inline double tick_step(double lo, double hi, int count) {
    const double raw = (hi - lo) / count;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    const double nice = r < 1.5 ? 1.0 : r < 3.0 ? 2.0 : r < 7.0 ? 5.0 : 10.0;
    return nice * mag;
}

}  // namespace detail

inline std::string LineChart::render() const {
    using detail::fixed;
    const double left = 70, right = 20, top = 40, bottom = 55;
    const double pw = width - left - right, ph = height - top - bottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    for (const auto& g : horizontal) {
        ymin = std::min(ymin, g.value);
        ymax = std::max(ymax, g.value);
    }
    for (const auto& g : vertical) {
        xmin = std::min(xmin, g.value);
        xmax = std::max(xmax, g.value);
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << fixed(width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << detail::escape_xml(title) << "</text>\n";

    // Axes and ticks.
    svg << "<g stroke=\"#888\" stroke-width=\"1\">\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
        << "\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
    svg << "</g>\n";
    const double xs = detail::tick_step(xmin, xmax, 8);
    for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
        svg << "<line x1=\"" << fixed(px(t)) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(px(t)) << "\" y2=\""
            << top + ph + 5 << "\" stroke=\"#888\"/>";
        svg << "<text x=\"" << fixed(px(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
            << detail::tick_label(t) << "</text>\n";
    }
    const double ys = detail::tick_step(ymin, ymax, 6);
    for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
        svg << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(py(t)) << "\" x2=\"" << left << "\" y2=\""
            << fixed(py(t)) << "\" stroke=\"#888\"/>";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << fixed(py(t) + 4) << "\" text-anchor=\"end\">"
            << detail::tick_label(std::abs(t) < 1e-12 * ys ? 0.0 : t) << "</text>\n";
    }
    svg << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
        << detail::escape_xml(x_label) << "</text>\n";
    svg << "<text transform=\"translate(18," << fixed(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << detail::escape_xml(y_label) << "</text>\n";

    for (const auto& g : horizontal) {
        svg << "<line x1=\"" << left << "\" y1=\"" << fixed(py(g.value)) << "\" x2=\"" << left + pw << "\" y2=\""
            << fixed(py(g.value)) << "\" stroke=\"" << g.colour << "\" stroke-dasharray=\"6 4\"/>";
        svg << "<text x=\"" << left + pw - 4 << "\" y=\"" << fixed(py(g.value) - 5) << "\" text-anchor=\"end\" fill=\""
            << g.colour << "\">" << detail::escape_xml(g.label) << "</text>\n";
    }
    for (const auto& g : vertical) {
        svg << "<line x1=\"" << fixed(px(g.value)) << "\" y1=\"" << top << "\" x2=\"" << fixed(px(g.value))
            << "\" y2=\"" << top + ph << "\" stroke=\"" << g.colour << "\" stroke-dasharray=\"2 3\"/>";
        svg << "<text x=\"" << fixed(px(g.value) + 4) << "\" y=\"" << top + 12 << "\" fill=\"" << g.colour << "\">"
            << detail::escape_xml(g.label) << "</text>\n";
    }

    double legend_y = top + 14;
    for (const auto& s : series) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.colour << "\" stroke-width=\"1.5\"";
        if (s.dashed) svg << " stroke-dasharray=\"5 3\"";
        svg << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            svg << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i])) << ' ';
        }
        svg << "\"/>\n";
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                svg << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i]))
                    << "\" r=\"3\" fill=\"" << s.colour << "\"/>";
            }
            svg << '\n';
        }
        if (!s.label.empty()) {
            svg << "<line x1=\"" << left + 10 << "\" y1=\"" << legend_y - 4 << "\" x2=\"" << left + 30 << "\" y2=\""
                << legend_y - 4 << "\" stroke=\"" << s.colour << "\" stroke-width=\"2\"/>";
            svg << "<text x=\"" << left + 36 << "\" y=\"" << legend_y << "\">" << detail::escape_xml(s.label)
                << "</text>\n";
            legend_y += 16;
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

// ---------------------------------------------------------------------------
// JSON views of results

inline json real_or_string(double v) { return std::isfinite(v) ? json(v) : json(format_real(v)); }

inline json to_json(const ArlEstimate& a) {
    return {{"threshold", a.threshold},
            {"trials", a.trials},
            {"horizon", a.horizon},
            {"mean_tau", a.mean_tau},
            {"stderr", a.standard_error},
            {"censored_frac", a.censored_fraction},
            {"lcb95", a.lcb95},
            {"warnings", a.warnings}};
}

inline json to_json(const CaddEstimate& c) {
    return {{"nu", c.nu},
            {"threshold", c.threshold},
            {"trials", c.trials},
            {"horizon", c.horizon},
            {"accepted", c.accepted},
            {"censored", c.censored},
            {"acceptance_rate", c.acceptance_rate},
            {"mean_delay", real_or_string(c.mean_delay)},
            {"stderr", real_or_string(c.standard_error)},
            {"flagged", c.flagged}};
}

inline json to_json(const OrderingSummary& s) {
    json j = {{"pass", s.pass}, {"worst", s.worst}, {"indices_checked", s.indices_checked}};
    j["first_failure"] = s.first_failure ? json(*s.first_failure) : json(nullptr);
    return j;
}

inline json to_json(const ConditionReport& r) {
    json moments = json::array();
    for (const auto& e : r.moments.estimates) {
        moments.push_back({{"k", e.k},
                           {"centre", e.centre},
                           {"estimate", e.estimate},
                           {"stderr", e.standard_error},
                           {"closed_form", e.closed_form ? json(*e.closed_form) : json(nullptr)},
                           {"within_bound", e.within_bound}});
    }
    json slln = json::array();
    for (const auto& p : r.slln.points) {
        slln.push_back({{"n", p.n},
                        {"mean_average", p.mean_average},
                        {"variance_of_average", p.variance_of_average},
                        {"q50", p.q50},
                        {"q90", p.q90},
                        {"q95", p.q95},
                        {"q99", p.q99}});
    }
    return {
        {"information_number_I", r.information_number_I},
        {"closed_form_I", r.closed_form_I ? json(*r.closed_form_I) : json(nullptr)},
        {"cesaro", {{"n_max", r.cesaro.averages.size()}, {"estimate", r.cesaro.estimate}}},
        {"mlr", to_json(r.mlr)},
        {"stochastic_dominance", to_json(r.stochastic_dominance)},
        {"moments",
         {{"bound_C", r.moments.bound},
          {"bound_from_model", r.moments.bound_from_model},
          {"pass", r.moments.pass},
          {"estimates", moments}}},
        {"slln",
         {{"reference_I", r.slln.reference_I},
          {"trials", r.slln.trials},
          {"q95_decreasing", r.slln.decreasing},
          {"note", "quantile decay over a growing grid is consistent with almost-sure convergence; it is not a proof"},
          {"points", slln}}},
        {"sum_dominance",
         {{"pass", r.sum_dominance.pass},
          {"max_gap", r.sum_dominance.max_gap},
          {"slack", r.sum_dominance.slack},
          {"trials", r.sum_dominance.trials},
          {"mean_small", r.sum_dominance.mean_small},
          {"mean_large", r.sum_dominance.mean_large}}},
        {"verdicts",
         {{"mlr", r.verdicts.mlr},
          {"stochastic_dominance", r.verdicts.stochastic_dominance},
          {"information", r.verdicts.information},
          {"moments", r.verdicts.moments},
          {"slln", r.verdicts.slln},
          {"sum_dominance", r.verdicts.sum_dominance},
          {"pass", r.pass()}}},
        {"warnings", r.warnings},
    };
}

}  // namespace excusum::cli
