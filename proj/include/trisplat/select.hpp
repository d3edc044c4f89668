#pragma once

#include <vector>

#include "trisplat/camera.hpp"
#include "trisplat/matcher.hpp"
#include "trisplat/svm.hpp"

namespace trisplat {

// Candidate pool for curation: a small elevation sweep plus a full azimuth
// orbit, with designated front/back views.
struct CandidateSet {
  std::vector<PosedView> views;
  int front_index = 0;
  int back_index = 0;
  std::vector<std::string> provenance;  // "elevation" or "azimuth" per view

  void validate() const {
    const int n = static_cast<int>(views.size());
    TS_CHECK(n >= 2, "CandidateSet: need at least two views");
    TS_CHECK(front_index >= 0 && front_index < n && back_index >= 0 && back_index < n,
             "CandidateSet: front/back index out of range");
    TS_CHECK(front_index != back_index, "CandidateSet: front and back must differ");
    TS_CHECK(provenance.empty() || provenance.size() == views.size(),
             "CandidateSet: provenance size mismatch");
  }
};

struct SelectionReport {
  std::vector<long> counts;    // per candidate; query entries hold query-query matches
  double mean = 0.0;           // over non-query candidates
  double stddev = 0.0;         // population standard deviation over non-query candidates
  double threshold = 0.0;      // mean - 0.6 * stddev
  std::vector<int> selected;   // ascending candidate indices, queries included
  std::vector<int> queries;
};

// Per-channel intensity histograms plus gradient orientation and magnitude
// histograms, concatenated for the front and back views.
Eigen::VectorXd extract_quality_features(const Image& front, const Image& back);

// true  -> query views are {front, back}
// false -> query view is {front} only
bool assess_back_view(const CandidateSet& c, const QualityClassifier& clf);

// The threshold rule alone, for a known count vector: statistics over
// non-query entries, selected = queries + {i : c_i > mean - 0.6*stddev}
// (>= when stddev == 0 so a degenerate pool is never emptied).
SelectionReport selection_from_counts(const std::vector<long>& counts,
                                      const std::vector<int>& queries);

// Full curation: back-view assessment picks the query set, match counts are
// summed over query views, then the threshold rule decides.
SelectionReport select_views(const CandidateSet& c, const QualityClassifier& clf,
                             const MatchConfig& mcfg = {});

}  // namespace trisplat
