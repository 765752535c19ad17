#include "oncosurv/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::report {

using nlohmann::json;

void validate(const EvalReport& r) {
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::internal, "invalid report: " + msg); };
    if (!(r.c_index >= 0.0 && r.c_index <= 1.0)) bad("c_index out of [0,1]");
    if (r.time_point_days <= 0) bad("time_point_days must be positive");
    if (!(r.f1_pos >= 0.0 && r.f1_pos <= 1.0) || !(r.f1_neg >= 0.0 && r.f1_neg <= 1.0)) bad("F1 out of [0,1]");
    if (r.calibration_bins.size() != 10) bad("expected 10 calibration bins");
    std::size_t total = 0;
    for (std::size_t b = 0; b < r.calibration_bins.size(); ++b) {
        const auto& bin = r.calibration_bins[b];
        if (std::abs(bin.lo - static_cast<double>(b) / 10.0) > 1e-12 ||
            std::abs(bin.hi - static_cast<double>(b + 1) / 10.0) > 1e-12)
            bad("calibration bins must span [0,1] in equal widths");
        if (bin.count == 0 && (bin.mean_predicted || bin.observed_fraction)) bad("empty bin with non-null fractions");
        total += bin.count;
    }
    if (total != static_cast<std::size_t>(r.confusion.population()))
        bad("calibration bin counts do not sum to the evaluated population");
}

std::string report_to_json(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json bins = json::array();
    for (const auto& b : r.calibration_bins) {
        bins.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"count", b.count},
                        {"mean_predicted", b.mean_predicted ? json(*b.mean_predicted) : json(nullptr)},
                        {"observed_fraction", b.observed_fraction ? json(*b.observed_fraction) : json(nullptr)}});
    }
    json importances = json::array();
    for (const auto& fi : r.feature_importances)
        importances.push_back({{"feature", fi.feature}, {"importance", fi.importance}});
    json j{{"c_index", r.c_index},
           {"accuracy", opt(r.accuracy)},
           {"precision", opt(r.precision)},
           {"recall", opt(r.recall)},
           {"f1_pos", r.f1_pos},
           {"f1_neg", r.f1_neg},
           {"f1_pos_degenerate", r.f1_pos_degenerate},
           {"f1_neg_degenerate", r.f1_neg_degenerate},
           {"time_point_days", r.time_point_days},
           {"threshold", r.threshold},
           {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
           {"n_evaluated", r.confusion.population()},
           {"n_excluded", r.n_excluded},
           {"calibration_bins", std::move(bins)},
           {"feature_importances", std::move(importances)},
           {"protocol",
            {{"split", r.protocol.split},
             {"seed", std::to_string(r.protocol.seed)},
             {"holdout_fraction", r.protocol.holdout_fraction},
             {"n_train", r.protocol.n_train},
             {"n_test", r.protocol.n_test}}}};
    return j.dump(2);
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

struct Frame {
    double w = 640.0, h = 420.0;
    double ml = 62.0, mr = 18.0, mt = 42.0, mb = 52.0;
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    double x(double v) const { return ml + (v - xmin) / (xmax - xmin) * (w - ml - mr); }
    double y(double v) const { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    return s;
}

void open_svg(std::ostringstream& out, const Frame& fr, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(fr.w) << "\" height=\"" << num(fr.h)
        << "\" viewBox=\"0 0 " << num(fr.w) << " " << num(fr.h) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(fr.w / 2.0) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\" font-weight=\"bold\">"
        << title << "</text>\n";
}

void axes(std::ostringstream& out, const Frame& fr, const std::vector<std::pair<double, std::string>>& xticks,
          const std::vector<std::pair<double, std::string>>& yticks, const std::string& xlabel,
          const std::string& ylabel) {
    double x0 = fr.x(fr.xmin), x1 = fr.x(fr.xmax);
    double y0 = fr.y(fr.ymin), y1 = fr.y(fr.ymax);
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1)
        << "\" stroke=\"black\"/>\n";
    for (const auto& [v, label] : xticks) {
        double px = fr.x(v);
        out << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\"" << num(y0 + 5)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << label << "</text>\n";
    }
    for (const auto& [v, label] : yticks) {
        double py = fr.y(v);
        out << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(py)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(x0 - 9) << "\" y=\"" << num(py + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << label << "</text>\n";
    }
    out << "<text x=\"" << num((x0 + x1) / 2.0) << "\" y=\"" << num(fr.h - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel << "</text>\n";
    out << "<text x=\"16\" y=\"" << num((y0 + y1) / 2.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
        << num((y0 + y1) / 2.0) << ")\">" << ylabel << "</text>\n";
}

std::vector<std::pair<double, std::string>> unit_ticks() {
    std::vector<std::pair<double, std::string>> ticks;
    for (int i = 0; i <= 5; ++i) {
        double v = static_cast<double>(i) / 5.0;
        ticks.emplace_back(v, num(v));
    }
    return ticks;
}

}  // namespace

std::string curves_csv(const std::vector<LabeledCurve>& curves) {
    std::ostringstream out;
    util::write_csv_row(out, {"label", "time_days", "survival"});
    for (const auto& lc : curves) {
        util::write_csv_row(out, {lc.label, "0", "1"});
        for (std::size_t i = 0; i < lc.curve.times.size(); ++i) {
            util::write_csv_row(out, {lc.label, util::format_double(lc.curve.times[i]),
                                      util::format_double(lc.curve.probabilities[i])});
        }
    }
    return out.str();
}

std::string curves_svg(const std::vector<LabeledCurve>& curves, const std::string& title) {
    Frame fr;
    double tmax = 1.0;
    for (const auto& lc : curves) {
        if (!lc.curve.times.empty()) tmax = std::max(tmax, lc.curve.times.back());
    }
    fr.xmax = tmax;
    std::ostringstream out;
    open_svg(out, fr, title);
    std::vector<std::pair<double, std::string>> xticks;
    for (int i = 0; i <= 4; ++i) {
        double v = std::round(tmax * static_cast<double>(i) / 4.0);
        xticks.emplace_back(v, num(v));
    }
    axes(out, fr, xticks, unit_ticks(), "days since treatment start", "survival probability");
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const auto& curve = curves[c].curve;
        std::ostringstream d;
        d << "M " << num(fr.x(0.0)) << " " << num(fr.y(1.0));
        for (std::size_t i = 0; i < curve.times.size(); ++i)
            d << " H " << num(fr.x(curve.times[i])) << " V " << num(fr.y(curve.probabilities[i]));
        d << " H " << num(fr.x(fr.xmax));
        out << "<path d=\"" << d.str() << "\" fill=\"none\" stroke=\"" << kPalette[c % kPaletteSize]
            << "\" stroke-width=\"2\"/>\n";
    }
    double lx = fr.w - fr.mr - 170.0, ly = fr.mt + 8.0;
    for (std::size_t c = 0; c < curves.size(); ++c) {
        double py = ly + 18.0 * static_cast<double>(c);
        out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(py) << "\" x2=\"" << num(lx + 24) << "\" y2=\"" << num(py)
            << "\" stroke=\"" << kPalette[c % kPaletteSize] << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(py + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << curves[c].label << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string calibration_csv(const std::vector<survival::CalibrationBin>& bins) {
    std::ostringstream out;
    util::write_csv_row(out, {"bin_lo", "bin_hi", "count", "mean_predicted", "observed_fraction"});
    for (const auto& b : bins) {
        util::write_csv_row(out, {util::format_double(b.lo), util::format_double(b.hi), std::to_string(b.count),
                                  b.mean_predicted ? util::format_double(*b.mean_predicted) : "",
                                  b.observed_fraction ? util::format_double(*b.observed_fraction) : ""});
    }
    return out.str();
}

std::string calibration_svg(const std::vector<survival::CalibrationBin>& bins, const std::string& title) {
    Frame fr;
    std::ostringstream out;
    open_svg(out, fr, title);
    axes(out, fr, unit_ticks(), unit_ticks(), "mean predicted probability", "observed fraction");
    out << "<line x1=\"" << num(fr.x(0.0)) << "\" y1=\"" << num(fr.y(0.0)) << "\" x2=\"" << num(fr.x(1.0))
        << "\" y2=\"" << num(fr.y(1.0)) << "\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n";
    std::ostringstream path;
    bool first = true;
    for (const auto& b : bins) {
        if (!b.mean_predicted || !b.observed_fraction) continue;
        path << (first ? "M " : " L ") << num(fr.x(*b.mean_predicted)) << " " << num(fr.y(*b.observed_fraction));
        first = false;
    }
    if (!first)
        out << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"2\"/>\n";
    for (const auto& b : bins) {
        if (!b.mean_predicted || !b.observed_fraction) continue;
        out << "<circle cx=\"" << num(fr.x(*b.mean_predicted)) << "\" cy=\"" << num(fr.y(*b.observed_fraction))
            << "\" r=\"4\" fill=\"" << kPalette[0] << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace oncosurv::report
