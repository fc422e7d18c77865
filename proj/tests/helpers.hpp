#pragma once

// Shared test utilities. The two brute-force oracles here are written straight
// from the definitions of the problems (monotone assignment, gap matching) and
// deliberately share nothing with the production code paths they check.

#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ivpipe/corpus.hpp"
#include "ivpipe/rng.hpp"
#include "ivpipe/segment.hpp"
#include "ivpipe/textsim.hpp"

namespace testutil {

using ivpipe::segment::npos;
using ivpipe::textsim::SimilarityMatrix;

inline std::string data_path(const std::string& rel) {
  return std::string(IVPIPE_DATA_DIR) + "/" + rel;
}

// Scores drawn from the grid k/1024 keep every sum of a handful of cells exact
// in a double, so oracle and implementation results can be compared with
// operator== instead of a tolerance.
inline double dyadic(ivpipe::rng::Rng& r) {
  return static_cast<double>(r.range(0, 1024)) / 1024.0;
}

inline SimilarityMatrix random_matrix(std::size_t rows, std::size_t cols, ivpipe::rng::Rng& r) {
  SimilarityMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.cells.resize(rows * cols);
  for (auto& c : m.cells) c = dyadic(r);
  return m;
}

// ---------------------------------------------------------------------------
// Monotone assignment oracle: walk the alignment grid move by move (match,
// skip utterance, skip question, in that preference order) and keep the first
// complete walk with the strictly best (score, matches) pair. Exponential and
// proudly so.
// ---------------------------------------------------------------------------

struct AlignOracle {
  double score = 0.0;
  int count = 0;
  std::vector<std::size_t> match;
};

namespace detail {

struct AlignWalk {
  const SimilarityMatrix& s;
  std::vector<std::size_t> current;
  AlignOracle best;
  bool found = false;

  void finish(double score, int count) {
    if (!found || score > best.score || (score == best.score && count > best.count)) {
      found = true;
      best.score = score;
      best.count = count;
      best.match = current;
    }
  }

  void walk(std::size_t i, std::size_t j, double score, int count) {
    if (i == s.rows || j == s.cols) {
      finish(score, count);
      return;
    }
    current[j] = i;
    walk(i + 1, j + 1, score + s.at(i, j), count + 1);
    current[j] = npos;
    walk(i + 1, j, score, count);
    walk(i, j + 1, score, count);
  }
};

}  // namespace detail

inline AlignOracle oracle_alignment(const SimilarityMatrix& s) {
  detail::AlignWalk w{s};
  w.current.assign(s.cols, npos);
  w.best.match = w.current;
  if (s.rows == 0 || s.cols == 0) return w.best;
  w.walk(0, 0, 0.0, 0);
  return w.best;
}

// Score and match count of an assignment, summed left to right.
inline std::pair<double, int> assignment_value(const std::vector<std::size_t>& match,
                                               const SimilarityMatrix& s) {
  double score = 0.0;
  int count = 0;
  for (std::size_t c = 0; c < match.size(); ++c)
    if (match[c] != npos) {
      score += s.at(match[c], c);
      ++count;
    }
  return {score, count};
}

// Rows strictly ascending over the matched columns, everything in bounds.
inline bool assignment_feasible(const std::vector<std::size_t>& match, std::size_t rows) {
  std::size_t prev = npos;
  for (std::size_t r : match) {
    if (r == npos) continue;
    if (r >= rows) return false;
    if (prev != npos && r <= prev) return false;
    prev = r;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Gap matching oracle: enumerate every ascending partial assignment over the
// kept edges (no pruning, no budget) and score it from the objective's
// definition. Exploration order matches the production search, row ascending
// and match before skip, so on top of the objective value the chosen
// assignment itself must agree.
// ---------------------------------------------------------------------------

struct BipartiteOracle {
  std::vector<std::size_t> match;
  double objective = 0.0;
};

inline double oracle_objective(const std::vector<std::size_t>& match, const SimilarityMatrix& e,
                               const SimilarityMatrix& l, const std::vector<bool>& core,
                               double edge_min) {
  const std::size_t m = e.cols;
  std::vector<double> bestE(m, -std::numeric_limits<double>::infinity());
  std::vector<double> bestL(m, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t r = 0; r < e.rows; ++r)
      if (e.at(r, c) > edge_min) {
        bestE[c] = std::max(bestE[c], e.at(r, c));
        bestL[c] = std::max(bestL[c], l.at(r, c));
      }

  double x1 = 0.0, x2 = 0.0;
  int matched = 0, x5 = 0, x6 = 0, x7 = 0, x8 = 0, x9 = 0;
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t r = match[c];
    if (r == npos) continue;
    ++matched;
    x1 += e.at(r, c);
    x2 += l.at(r, c);
    if (core[c]) ++x5;
    if (e.at(r, c) == bestE[c]) {
      ++x6;
      if (core[c]) ++x8;
    }
    if (l.at(r, c) == bestL[c]) {
      ++x7;
      if (core[c]) ++x9;
    }
  }
  const double x3 = matched ? x1 / matched : 0.0;
  const double x4 = matched ? x2 / matched : 0.0;
  return x1 + x2 + x3 + x4 + 0.1 * x5 + 0.1 * x6 + 0.1 * x7 + 0.2 * x8 + 0.2 * x9;
}

namespace detail {

struct BipartiteWalk {
  const SimilarityMatrix& e;
  const SimilarityMatrix& l;
  const std::vector<bool>& core;
  double edge_min;
  std::vector<std::size_t> current;
  BipartiteOracle best;
  bool found = false;

  void walk(std::size_t c, std::size_t next_row) {
    if (c == e.cols) {
      const double y = oracle_objective(current, e, l, core, edge_min);
      if (!found || y > best.objective) {
        found = true;
        best.objective = y;
        best.match = current;
      }
      return;
    }
    for (std::size_t r = next_row; r < e.rows; ++r) {
      if (!(e.at(r, c) > edge_min)) continue;
      current[c] = r;
      walk(c + 1, r + 1);
      current[c] = npos;
    }
    walk(c + 1, next_row);
  }
};

}  // namespace detail

inline BipartiteOracle oracle_bipartite(const SimilarityMatrix& e, const SimilarityMatrix& l,
                                        const std::vector<bool>& core, double edge_min) {
  detail::BipartiteWalk w{e, l, core, edge_min};
  w.current.assign(e.cols, npos);
  w.best.match = w.current;
  if (e.rows == 0 || e.cols == 0) {
    w.best.objective = 0.0;
    return w.best;
  }
  w.walk(0, 0);
  return w.best;
}

// ---------------------------------------------------------------------------
// Boundary comparison: a session boundary is the (section, question, first
// utterance) triple; end markers and spans are not compared.
// ---------------------------------------------------------------------------

using Boundary = std::tuple<std::string, std::string, int>;

inline std::set<Boundary> boundary_set(const ivpipe::segment::SegmentedInterview& seg) {
  std::set<Boundary> out;
  for (const auto& sec : seg.sections)
    for (const auto& sess : sec.sessions) out.insert({sec.section_id, sess.qid, sess.start_utt});
  return out;
}

struct BoundaryCounts {
  long tp = 0, fp = 0, fn = 0;

  void add(const std::set<Boundary>& truth, const std::set<Boundary>& pred) {
    for (const auto& b : pred) (truth.count(b) ? tp : fp) += 1;
    for (const auto& b : truth)
      if (!pred.count(b)) fn += 1;
  }

  double f1() const {
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 1.0 : 2.0 * tp / denom;
  }
};

// ---------------------------------------------------------------------------
// Small builders.
// ---------------------------------------------------------------------------

inline ivpipe::corpus::Transcript make_transcript(
    const std::string& id, const std::vector<std::pair<std::string, std::string>>& turns,
    ivpipe::corpus::Source source = ivpipe::corpus::Source::merged) {
  ivpipe::corpus::Transcript t;
  t.interview_id = id;
  t.source = source;
  int next = 0;
  for (const auto& [speaker, text] : turns) {
    ivpipe::corpus::Utterance u;
    u.id = next++;
    u.speaker = speaker;
    u.text = text;
    t.utterances.push_back(std::move(u));
  }
  return t;
}

// Same, with word timings laid out on a fixed grid (one slot per word).
inline ivpipe::corpus::Transcript make_timed_transcript(
    const std::string& id, const std::vector<std::pair<std::string, std::string>>& turns,
    std::int64_t slot_ms = 400) {
  auto t = make_transcript(id, turns);
  std::int64_t clock = 0;
  for (auto& u : t.utterances) {
    for (const auto& w : ivpipe::text::split_ws(u.text)) {
      ivpipe::corpus::Word word;
      word.text = w;
      word.start_ms = clock;
      word.end_ms = clock + slot_ms;
      u.words.push_back(std::move(word));
      clock += slot_ms;
    }
  }
  return t;
}

}  // namespace testutil
