#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace dfd {

// Scored, ground-truth-labeled examples. Orientation is fixed project-wide:
// higher score = more likely fake. label 1 = fake, 0 = bonafide.
struct ScoreEntry {
  std::string id;
  double score = 0.0;
  int label = 0;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;

  size_t count(int label) const;
  void require_both_classes() const;
};

// Mann-Whitney AUC with half credit for ties, computed from exact pair
// counts: (2*wins + ties) / (2 * n_fake * n_bona). With this form
// auc(s) + auc(flipped s) == 1 holds exactly in double arithmetic for the
// sizes this project evaluates.
double auc(const ScoreSet& s);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over distinct scores. FAR(t) = share of bonafide scoring
// >= t, FRR(t) = share of fake scoring < t; the crossing is linearly
// interpolated between the bracketing thresholds.
EerResult eer(const ScoreSet& s);

// Fraction classified correctly when score >= threshold means fake.
double accuracy(const ScoreSet& s, double threshold);

struct RunMetrics {
  std::string name;
  double eer = 0.0;
  double eer_threshold = 0.0;
  double auc = 0.0;
  double accuracy = 0.0;
};

RunMetrics compute_run(const std::string& name, const ScoreSet& s,
                       double accuracy_threshold = 0.5);

// Report in both machine and eyeball form. Row order follows the input.
nlohmann::json report_json(const std::vector<RunMetrics>& runs);
std::string report_table(const std::vector<RunMetrics>& runs);

// CSV persistence: header `id,label,score`, labels spelled bonafide/fake,
// scores with round-trip precision.
void write_scores_csv(const ScoreSet& s, const std::string& path);
ScoreSet read_scores_csv(const std::string& path);

}  // namespace dfd
