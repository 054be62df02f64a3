#include "dfd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfd/error.hpp"

namespace dfd {

size_t ScoreSet::count(int label) const {
  size_t n = 0;
  for (const auto& e : entries)
    if (e.label == label) ++n;
  return n;
}

void ScoreSet::require_both_classes() const {
  if (count(1) == 0 || count(0) == 0)
    fail(Errc::single_class, "metric needs both bonafide and fake entries");
  for (const auto& e : entries)
    if (!std::isfinite(e.score)) fail(Errc::invalid_argument, "non-finite score");
}

double auc(const ScoreSet& s) {
  s.require_both_classes();
  std::vector<std::pair<double, int>> v;
  v.reserve(s.entries.size());
  for (const auto& e : s.entries) v.emplace_back(e.score, e.label);
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Ascending sweep over tie groups: every fake beats all bonafide strictly
  // below it and half-ties with bonafide at the same score.
  uint64_t wins = 0, ties = 0, bona_below = 0;
  size_t i = 0;
  const size_t n = v.size();
  while (i < n) {
    size_t j = i;
    uint64_t fake_here = 0, bona_here = 0;
    while (j < n && v[j].first == v[i].first) {
      if (v[j].second == 1)
        ++fake_here;
      else
        ++bona_here;
      ++j;
    }
    wins += fake_here * bona_below;
    ties += fake_here * bona_here;
    bona_below += bona_here;
    i = j;
  }

  const uint64_t n_fake = s.count(1);
  const uint64_t n_bona = s.count(0);
  return static_cast<double>(2 * wins + ties) / static_cast<double>(2 * n_fake * n_bona);
}

EerResult eer(const ScoreSet& s) {
  s.require_both_classes();
  std::vector<double> fakes, bonas;
  for (const auto& e : s.entries)
    (e.label == 1 ? fakes : bonas).push_back(e.score);
  std::sort(fakes.begin(), fakes.end());
  std::sort(bonas.begin(), bonas.end());

  std::vector<double> thresholds;
  thresholds.reserve(s.entries.size() + 1);
  for (const auto& e : s.entries) thresholds.push_back(e.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);  // sentinel: everything below

  auto far_at = [&](double t) {
    // share of bonafide with score >= t
    const auto it = std::lower_bound(bonas.begin(), bonas.end(), t);
    return static_cast<double>(bonas.end() - it) / static_cast<double>(bonas.size());
  };
  auto frr_at = [&](double t) {
    // share of fake with score < t
    const auto it = std::lower_bound(fakes.begin(), fakes.end(), t);
    return static_cast<double>(it - fakes.begin()) / static_cast<double>(fakes.size());
  };

  double prev_t = thresholds.front();
  double prev_d = far_at(prev_t) - frr_at(prev_t);
  if (prev_d <= 0.0) {
    // Crossing sits at or below the lowest threshold.
    return {far_at(prev_t), prev_t};
  }
  for (size_t i = 1; i < thresholds.size(); ++i) {
    const double t = thresholds[i];
    const double d = far_at(t) - frr_at(t);
    if (d <= 0.0) {
      const double w = prev_d / (prev_d - d);  // in (0, 1]
      const double eer_v = far_at(prev_t) + w * (far_at(t) - far_at(prev_t));
      return {eer_v, prev_t + w * (t - prev_t)};
    }
    prev_t = t;
    prev_d = d;
  }
  return {frr_at(thresholds.back()), thresholds.back()};  // unreachable in practice
}

double accuracy(const ScoreSet& s, double threshold) {
  if (s.entries.empty()) fail(Errc::empty_input, "accuracy of an empty score set");
  size_t correct = 0;
  for (const auto& e : s.entries) {
    const int predicted = e.score >= threshold ? 1 : 0;
    if (predicted == e.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(s.entries.size());
}

RunMetrics compute_run(const std::string& name, const ScoreSet& s, double accuracy_threshold) {
  RunMetrics r;
  r.name = name;
  const auto e = eer(s);
  r.eer = e.eer;
  r.eer_threshold = e.threshold;
  r.auc = auc(s);
  r.accuracy = accuracy(s, accuracy_threshold);
  return r;
}

nlohmann::json report_json(const std::vector<RunMetrics>& runs) {
  nlohmann::json out;
  out["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    out["runs"].push_back({{"name", r.name},
                           {"eer", r.eer},
                           {"eer_threshold", r.eer_threshold},
                           {"auc", r.auc},
                           {"accuracy", r.accuracy}});
  }
  return out;
}

std::string report_table(const std::vector<RunMetrics>& runs) {
  size_t name_w = 4;
  for (const auto& r : runs) name_w = std::max(name_w, r.name.size());
  std::ostringstream os;
  os << std::left;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %8s\n", static_cast<int>(name_w), "run",
                "EER%", "AUC%", "Acc%");
  os << buf;
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %8.2f  %8.2f\n", static_cast<int>(name_w),
                  r.name.c_str(), 100.0 * r.eer, 100.0 * r.auc, 100.0 * r.accuracy);
    os << buf;
  }
  return os.str();
}

void write_scores_csv(const ScoreSet& s, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(Errc::unwritable_path, "cannot write " + path);
  f << "id,label,score\n";
  char buf[64];
  for (const auto& e : s.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.score);
    f << e.id << ',' << (e.label == 1 ? "fake" : "bonafide") << ',' << buf << '\n';
  }
  if (!f.flush()) fail(Errc::unwritable_path, "write failed: " + path);
}

ScoreSet read_scores_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::file_missing, "cannot open " + path);
  ScoreSet s;
  std::string line;
  if (!std::getline(f, line) || line != "id,label,score")
    fail(Errc::corrupt_file, "bad score CSV header in " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const size_t c2 = line.rfind(',');
    const size_t c1 = c2 == std::string::npos ? std::string::npos : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c1 == c2)
      fail(Errc::corrupt_file, "bad score CSV row: " + line);
    ScoreEntry e;
    e.id = line.substr(0, c1);
    const std::string label = line.substr(c1 + 1, c2 - c1 - 1);
    if (label == "fake")
      e.label = 1;
    else if (label == "bonafide")
      e.label = 0;
    else
      fail(Errc::corrupt_file, "bad label in score CSV: " + label);
    e.score = std::strtod(line.c_str() + c2 + 1, nullptr);
    s.entries.push_back(std::move(e));
  }
  return s;
}

}  // namespace dfd
