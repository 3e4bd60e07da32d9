#include "alt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "alt/simd/kernels.hpp"
#include "alt/util/errors.hpp"

namespace alt::eval {
namespace {

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  double pos = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

GroupSummary summarize(const std::string& name, std::vector<double> values) {
  std::sort(values.begin(), values.end());
  GroupSummary s;
  s.group = name;
  s.n = values.size();
  s.min = values.front();
  s.max = values.back();
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  s.mean = simd::sum(values.data(), values.size()) /
           static_cast<double>(values.size());
  return s;
}

Histogram make_hist(const std::string& name, const std::vector<double>& values,
                    int bins = 20) {
  Histogram h;
  h.name = name;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (values.empty()) return h;
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  h.lo = *mn;
  h.hi = *mx;
  double span = h.hi - h.lo;
  for (double v : values) {
    int b = span > 0.0
                ? std::min(bins - 1, static_cast<int>((v - h.lo) / span * bins))
                : 0;
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace

EvalReport metrics(const std::vector<double>& y,
                   const std::vector<double>& yhat, double gamma) {
  if (y.empty() || y.size() != yhat.size())
    throw DataError("metrics: need equal, non-empty label/prediction vectors");
  if (gamma <= 0.0) throw ConfigError("metrics: gamma must be positive");
  for (double v : y)
    if (v <= 0.0)
      throw DataError("metrics: labels must be positive durations");

  EvalReport r;
  r.n = y.size();
  r.gamma = gamma;
  double nn = static_cast<double>(r.n);
  r.rmse = std::sqrt(simd::sq_diff_sum(y.data(), yhat.data(), r.n) / nn);
  r.mae = simd::abs_diff_sum(y.data(), yhat.data(), r.n) / nn;
  r.ape.reserve(r.n);
  std::size_t bad = 0;
  double ape_sum = 0.0;
  std::size_t under30 = 0, under60 = 0, under120 = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    double abs_err = std::abs(y[i] - yhat[i]);
    double ape = abs_err / y[i];
    r.ape.push_back(ape);
    ape_sum += ape;
    if (ape > gamma) ++bad;
    if (abs_err < 30.0) ++under30;
    if (abs_err < 60.0) ++under60;
    if (abs_err < 120.0) ++under120;
  }
  r.mape = ape_sum / nn;
  r.bad_ratio = static_cast<double>(bad) / nn;
  r.pct_abs_err_under[30] = static_cast<double>(under30) / nn;
  r.pct_abs_err_under[60] = static_cast<double>(under60) / nn;
  r.pct_abs_err_under[120] = static_cast<double>(under120) / nn;
  return r;
}

std::vector<std::pair<double, double>> ape_cdf(const EvalReport& report) {
  if (report.n == 0) throw DataError("ape_cdf: empty report");
  std::vector<double> sorted = report.ape;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> cdf;
  double nn = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    double frac = static_cast<double>(i + 1) / nn;
    if (!cdf.empty() && cdf.back().first == sorted[i])
      cdf.back().second = frac;  // collapse ties into one step
    else
      cdf.emplace_back(sorted[i], frac);
  }
  return cdf;
}

Comparison compare(const EvalReport& base, const EvalReport& proposed) {
  if (base.n != proposed.n)
    throw DataError("compare: reports cover different sample counts");
  Comparison c;
  auto add = [&](const std::string& name, double b, double p) {
    c.rows.push_back({name, b, p, p - b});
  };
  add("rmse_s", base.rmse, proposed.rmse);
  add("mae_s", base.mae, proposed.mae);
  add("mape", base.mape, proposed.mape);
  add("bad_ratio", base.bad_ratio, proposed.bad_ratio);
  add("pct_under_30s", base.pct_abs_err_under.at(30),
      proposed.pct_abs_err_under.at(30));
  add("pct_under_60s", base.pct_abs_err_under.at(60),
      proposed.pct_abs_err_under.at(60));
  add("pct_under_120s", base.pct_abs_err_under.at(120),
      proposed.pct_abs_err_under.at(120));

  double b60 = base.pct_abs_err_under.at(60) * 100.0;
  double p60 = proposed.pct_abs_err_under.at(60) * 100.0;
  c.under60_improvement_pts = p60 - b60;
  c.bad_ratio_delta_pts = (base.bad_ratio - proposed.bad_ratio) * 100.0;

  // The published reference results report this pair as a 28.37-point
  // improvement although the exact difference is 28.33.
  if (std::abs(b60 - 51.07) < 0.005 && std::abs(p60 - 79.40) < 0.005) {
    c.discrepancy_note =
        "under-60s improvement: exact difference 79.40 - 51.07 = 28.33 pts; "
        "the reference results print 28.37 pts";
  }
  return c;
}

std::string Comparison::format() const {
  std::string out;
  out += "metric           base       proposed   delta\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-16s %-10.4f %-10.4f %+.4f\n",
                  r.metric.c_str(), r.base, r.proposed, r.delta);
    out += buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "under-60s improvement: %+.2f pts\nbad-ratio reduction: %+.2f "
                "pts\n",
                under60_improvement_pts, bad_ratio_delta_pts);
  out += buf;
  if (discrepancy_note) out += "note: " + *discrepancy_note + "\n";
  return out;
}

AnalysisReport analysis_report(
    const std::vector<dataset::ArrivalSample>& samples,
    const std::map<std::string, int>& holdings) {
  if (samples.empty()) throw DataError("analysis_report: no samples");
  AnalysisReport rep;

  std::map<int, std::vector<double>> by_recat;
  std::vector<double> held, not_held;
  std::vector<double> dt[2], dvavg[2], dvlead[2];  // [status]
  for (const auto& s : samples) {
    int recat = static_cast<int>(std::llround(s.tabular[11]));
    by_recat[recat].push_back(s.label_seconds);
    auto it = holdings.find(s.aircraft_id);
    int status = it != holdings.end() ? it->second : 0;
    (status ? held : not_held).push_back(s.label_seconds);
    dt[status].push_back(s.holding_vec[1]);
    dvavg[status].push_back(s.holding_vec[2]);
    dvlead[status].push_back(s.holding_vec[3]);
  }
  for (int c = 0; c <= 5; ++c) {
    auto it = by_recat.find(c);
    if (it == by_recat.end()) {
      rep.notes.push_back("recat class " + std::to_string(c) +
                          " absent; row omitted");
      continue;
    }
    rep.label_by_recat.push_back(
        summarize("recat_" + std::to_string(c), it->second));
  }
  if (held.empty())
    rep.notes.push_back("no holding aircraft; holding row omitted");
  else
    rep.label_by_holding.push_back(summarize("holding", held));
  if (not_held.empty())
    rep.notes.push_back("no non-holding aircraft; row omitted");
  else
    rep.label_by_holding.push_back(summarize("non_holding", not_held));

  const char* status_name[2] = {"non_holding", "holding"};
  for (int st = 0; st < 2; ++st) {
    rep.holding_feature_hists.push_back(
        make_hist(std::string("dt_trc_") + status_name[st], dt[st]));
    rep.holding_feature_hists.push_back(
        make_hist(std::string("dv_avg_") + status_name[st], dvavg[st]));
    rep.holding_feature_hists.push_back(
        make_hist(std::string("dv_lead_") + status_name[st], dvlead[st]));
  }
  return rep;
}

void write_metrics_csv(const EvalReport& r, const std::string& path) {
  auto out = open_out(path);
  out << "n,gamma,rmse_s,mae_s,mape,bad_ratio,pct_under_30s,pct_under_60s,"
         "pct_under_120s\n";
  out << r.n << ',' << fmt(r.gamma, 3) << ',' << fmt(r.rmse) << ','
      << fmt(r.mae) << ',' << fmt(r.mape) << ',' << fmt(r.bad_ratio) << ','
      << fmt(r.pct_abs_err_under.at(30)) << ','
      << fmt(r.pct_abs_err_under.at(60)) << ','
      << fmt(r.pct_abs_err_under.at(120)) << '\n';
}

void write_ape_cdf_csv(const std::vector<std::pair<double, double>>& cdf,
                       const std::string& path) {
  auto out = open_out(path);
  out << "ape,cumulative_fraction\n";
  for (const auto& [a, f] : cdf) out << fmt(a) << ',' << fmt(f) << '\n';
}

void write_cdf_svg(const std::vector<std::pair<double, double>>& cdf,
                   const std::string& path) {
  auto out = open_out(path);
  const int w = 640, h = 420, m = 40;
  double xmax = cdf.empty() ? 1.0 : std::max(1e-9, cdf.back().first);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m
      << "\" y2=\"" << h - m << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m
      << "\" y2=\"" << h - m << "\" stroke=\"black\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"blue\" points=\"";
  for (const auto& [a, f] : cdf) {
    double px = m + a / xmax * (w - 2 * m);
    double py = h - m - f * (h - 2 * m);
    out << fmt(px, 1) << ',' << fmt(py, 1) << ' ';
  }
  out << "\"/>\n</svg>\n";
}

void write_analysis_csv(const AnalysisReport& r, const std::string& dir) {
  auto write_groups = [&](const std::vector<GroupSummary>& groups,
                          const std::string& path) {
    auto out = open_out(path);
    out << "group,n,min,q25,median,q75,max,mean\n";
    for (const auto& g : groups)
      out << g.group << ',' << g.n << ',' << fmt(g.min) << ',' << fmt(g.q25)
          << ',' << fmt(g.median) << ',' << fmt(g.q75) << ',' << fmt(g.max)
          << ',' << fmt(g.mean) << '\n';
  };
  write_groups(r.label_by_recat, dir + "/analysis_label_by_recat.csv");
  write_groups(r.label_by_holding, dir + "/analysis_label_by_holding.csv");
  auto out = open_out(dir + "/analysis_holding_hists.csv");
  out << "name,lo,hi,counts\n";
  for (const auto& hist : r.holding_feature_hists) {
    out << hist.name << ',' << fmt(hist.lo) << ',' << fmt(hist.hi) << ',';
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      if (i) out << ';';
      out << hist.counts[i];
    }
    out << '\n';
  }
  if (!r.notes.empty()) {
    auto notes = open_out(dir + "/analysis_notes.txt");
    for (const auto& n : r.notes) notes << n << '\n';
  }
}

void write_analysis_svg(const AnalysisReport& r, const std::string& dir) {
  for (const auto& hist : r.holding_feature_hists) {
    auto out = open_out(dir + "/analysis_" + hist.name + ".svg");
    const int w = 640, h = 420, m = 40;
    std::size_t peak = 1;
    for (auto c : hist.counts) peak = std::max(peak, c);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
        << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    double bw = static_cast<double>(w - 2 * m) /
                static_cast<double>(hist.counts.size());
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      double bh = static_cast<double>(hist.counts[i]) /
                  static_cast<double>(peak) * (h - 2 * m);
      out << "<rect x=\"" << fmt(m + static_cast<double>(i) * bw, 1)
          << "\" y=\"" << fmt(h - m - bh, 1) << "\" width=\"" << fmt(bw - 1, 1)
          << "\" height=\"" << fmt(bh, 1) << "\" fill=\"steelblue\"/>\n";
    }
    out << "</svg>\n";
  }
}

}  // namespace alt::eval
