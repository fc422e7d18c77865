#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ivpipe/corpus.hpp"
#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/log.hpp"
#include "ivpipe/schema.hpp"
#include "ivpipe/textsim.hpp"

namespace ivpipe::segment {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

// Every threshold of the section and question matcher in one place. All
// comparisons against these are strict.
struct SegmentConfig {
  double gate_avg = 0.6;      // mean of per-question maxima a section must beat
  double gate_strong = 0.8;   // gate alternative 1: at least 3 maxima above
  double gate_top = 0.9;      // gate alternative 2: at least 2 maxima above
  double overlap_sel = 0.6;   // score filter when two sections claim an utterance
  double anchor_embed = 0.8;  // anchor must beat this on the embedding channel
  double anchor_lev = 0.7;    // and this on the Levenshtein channel
  double edge_min_embed = 0.4;  // bipartite edges below this are discarded
  std::size_t bipartite_node_budget = std::size_t{1} << 20;
};

// One matched question: the utterance that voiced it and the match score.
// A tuple with an empty qid is the section-end marker.
struct MatchTuple {
  int utterance_id = 0;
  std::string qid;
  double score = 0.0;
};

// Strictly ascending utterance ids throughout.
using MatchList = std::vector<MatchTuple>;

// Scores strictly above the threshold, original order kept.
inline std::vector<double> select(const std::vector<double>& scores, double threshold) {
  std::vector<double> out;
  for (double s : scores)
    if (s > threshold) out.push_back(s);
  return out;
}

inline bool section_gate(const std::vector<double>& column_maxima, const SegmentConfig& cfg) {
  if (column_maxima.empty()) return false;
  double sum = 0.0;
  for (double s : column_maxima) sum += s;
  if (!(sum / static_cast<double>(column_maxima.size()) > cfg.gate_avg)) return false;
  return select(column_maxima, cfg.gate_strong).size() >= 3 ||
         select(column_maxima, cfg.gate_top).size() >= 2;
}

// ---------------------------------------------------------------------------
// Monotone assignment: at most one row per column, rows strictly ascending in
// column order, total score maximized over all partial assignments (so a
// column whose only reachable scores are negative is simply left out). Ties
// prefer more matched columns, then earlier rows.
// Returns match[c] = row index or npos.
// ---------------------------------------------------------------------------
inline std::vector<std::size_t> sequence_alignment(const textsim::SimilarityMatrix& s) {
  const std::size_t n = s.rows, m = s.cols;
  std::vector<std::size_t> match(m, npos);
  if (n == 0 || m == 0) return match;

  struct Cell {
    double score = 0.0;
    int count = 0;
  };
  auto better = [](const Cell& a, const Cell& b) {
    return a.score > b.score || (a.score == b.score && a.count > b.count);
  };
  // f[i][j] = best over rows i.., columns j..
  std::vector<Cell> f((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cell& { return f[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;) {
      Cell best = at(i + 1, j);  // skip row i
      if (better(at(i, j + 1), best)) best = at(i, j + 1);  // leave column j unmatched
      const Cell take{s.at(i, j) + at(i + 1, j + 1).score, at(i + 1, j + 1).count + 1};
      if (better(take, best)) best = take;
      at(i, j) = best;
    }

  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    const Cell& here = at(i, j);
    const Cell take{s.at(i, j) + at(i + 1, j + 1).score, at(i + 1, j + 1).count + 1};
    if (take.score == here.score && take.count == here.count) {
      match[j] = i;
      ++i;
      ++j;
    } else if (at(i + 1, j).score == here.score && at(i + 1, j).count == here.count) {
      ++i;
    } else {
      ++j;
    }
  }
  return match;
}

// ---------------------------------------------------------------------------
// Section matching: similarity, gate, then monotone assignment.
// ---------------------------------------------------------------------------

inline std::vector<std::string> utterance_texts(const corpus::Transcript& t) {
  std::vector<std::string> out;
  out.reserve(t.utterances.size());
  for (const auto& u : t.utterances) out.push_back(u.text);
  return out;
}

inline std::vector<std::string> question_texts(const std::vector<const schema::Question*>& qs) {
  std::vector<std::string> out;
  out.reserve(qs.size());
  for (const auto* q : qs) out.push_back(q->text);
  return out;
}

// Empty result when the section fails the gate; otherwise one tuple per
// assignable question, ascending by utterance.
inline MatchList section_match(const corpus::Transcript& t,
                               const std::vector<const schema::Question*>& questions,
                               textsim::Channel channel, textsim::EmbeddingProvider* provider,
                               const SegmentConfig& cfg) {
  const auto s =
      textsim::similarity_matrix(utterance_texts(t), question_texts(questions), channel, provider);
  if (!section_gate(s.column_maxima(), cfg)) return {};
  const auto assignment = sequence_alignment(s);
  MatchList out;
  for (std::size_t c = 0; c < assignment.size(); ++c)
    if (assignment[c] != npos)
      out.push_back({t.utterances[assignment[c]].id, questions[c]->qid, s.at(assignment[c], c)});
  std::sort(out.begin(), out.end(),
            [](const MatchTuple& a, const MatchTuple& b) { return a.utterance_id < b.utterance_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Overlap resolution between two sections claiming the same utterances: the
// side whose shared tuples carry fewer strong scores forfeits them.
// ---------------------------------------------------------------------------
inline std::pair<MatchList, MatchList> remove_overlap(const MatchList& r1, const MatchList& r2,
                                                      const SegmentConfig& cfg) {
  std::set<int> ids1, ids2;
  for (const auto& t : r1) ids1.insert(t.utterance_id);
  for (const auto& t : r2) ids2.insert(t.utterance_id);

  std::vector<double> shared1, shared2;
  for (const auto& t : r1)
    if (ids2.count(t.utterance_id)) shared1.push_back(t.score);
  for (const auto& t : r2)
    if (ids1.count(t.utterance_id)) shared2.push_back(t.score);

  auto strip_shared = [](const MatchList& r, const std::set<int>& other) {
    MatchList out;
    for (const auto& t : r)
      if (!other.count(t.utterance_id)) out.push_back(t);
    return out;
  };

  if (select(shared1, cfg.overlap_sel).size() > select(shared2, cfg.overlap_sel).size())
    return {r1, strip_shared(r2, ids1)};
  return {strip_shared(r1, ids2), r2};
}

// ---------------------------------------------------------------------------
// Final bipartite matching over a gap: rows are utterances, columns are
// questions, edges pruned by embedding score. The objective over a matching M
// (evaluated in column order, left to right):
//   x1 sum of embedding scores     x2 sum of Levenshtein scores
//   x3 mean embedding over M       x4 mean Levenshtein over M (0 when empty)
//   x5 matched core questions
//   x6 / x7 matched questions whose edge attains the question's best kept
//           embedding / Levenshtein score (ties count)
//   x8 / x9 the same, core questions only
//   y = x1 + x2 + x3 + x4 + 0.1*x5 + 0.1*x6 + 0.1*x7 + 0.2*x8 + 0.2*x9
// ---------------------------------------------------------------------------

inline double bipartite_objective(const std::vector<std::size_t>& match,
                                  const textsim::SimilarityMatrix& e,
                                  const textsim::SimilarityMatrix& l,
                                  const std::vector<bool>& core, const SegmentConfig& cfg) {
  const std::size_t m = e.cols;
  std::vector<double> bestE(m, -std::numeric_limits<double>::infinity());
  std::vector<double> bestL(m, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t r = 0; r < e.rows; ++r)
      if (e.at(r, c) > cfg.edge_min_embed) {
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

struct BipartiteResult {
  std::vector<std::size_t> match;  // match[c] = row or npos, rows ascending
  double objective = 0.0;
  bool exhaustive = true;  // false when the node budget forced the greedy fallback
};

namespace detail {

struct BipartiteSearch {
  const textsim::SimilarityMatrix& e;
  const textsim::SimilarityMatrix& l;
  const std::vector<bool>& core;
  const SegmentConfig& cfg;
  std::vector<double> suffix_ub;  // optimistic edge + bonus mass for columns c..
  std::vector<std::size_t> current, best;
  double best_y = -std::numeric_limits<double>::infinity();
  std::size_t nodes = 0;
  bool budget_hit = false;

  bool kept(std::size_t r, std::size_t c) const { return e.at(r, c) > cfg.edge_min_embed; }

  void run() {
    const std::size_t m = e.cols;
    current.assign(m, npos);
    best = current;
    suffix_ub.assign(m + 1, 0.0);
    for (std::size_t c = m; c-- > 0;) {
      double cell = 0.0;
      for (std::size_t r = 0; r < e.rows; ++r)
        if (kept(r, c)) cell = std::max(cell, e.at(r, c) + l.at(r, c) + 0.7);
      suffix_ub[c] = suffix_ub[c + 1] + cell;
    }
    dfs(0, 0, 0.0);
  }

  void dfs(std::size_t c, std::size_t next_row, double partial) {
    if (budget_hit) return;
    if (++nodes > cfg.bipartite_node_budget) {
      budget_hit = true;
      return;
    }
    if (c == e.cols) {
      const double y = bipartite_objective(current, e, l, core, cfg);
      if (y > best_y) {
        best_y = y;
        best = current;
      }
      return;
    }
    // means are each at most 1, hence the +2 slack
    if (partial + suffix_ub[c] + 2.0 + 1e-9 < best_y) return;
    for (std::size_t r = next_row; r < e.rows; ++r) {
      if (!kept(r, c)) continue;
      current[c] = r;
      dfs(c + 1, r + 1, partial + e.at(r, c) + l.at(r, c) + 0.7);
      current[c] = npos;
    }
    dfs(c + 1, next_row, partial);
  }
};

}  // namespace detail

inline BipartiteResult final_bipartite(const textsim::SimilarityMatrix& e,
                                       const textsim::SimilarityMatrix& l,
                                       const std::vector<bool>& core, const SegmentConfig& cfg) {
  if (e.rows != l.rows || e.cols != l.cols)
    throw DimensionMismatch("bipartite channels disagree on matrix shape");
  if (core.size() != e.cols)
    throw DimensionMismatch("bipartite core flags disagree with question count");

  BipartiteResult out;
  out.match.assign(e.cols, npos);
  if (e.rows == 0 || e.cols == 0) return out;

  detail::BipartiteSearch search{e, l, core, cfg};
  search.run();
  if (!search.budget_hit) {
    out.match = search.best;
    out.objective = search.best_y;
    return out;
  }

  // Budget exhausted: greedy by embedding, still ascending.
  log::warn("bipartite_budget_exhausted",
            {{"rows", e.rows}, {"cols", e.cols}, {"budget", cfg.bipartite_node_budget}});
  out.exhaustive = false;
  std::size_t next_row = 0;
  for (std::size_t c = 0; c < e.cols; ++c) {
    std::size_t pick = npos;
    for (std::size_t r = next_row; r < e.rows; ++r)
      if (e.at(r, c) > cfg.edge_min_embed && (pick == npos || e.at(r, c) > e.at(pick, c)))
        pick = r;
    if (pick != npos) {
      out.match[c] = pick;
      next_row = pick + 1;
    }
  }
  out.objective = bipartite_objective(out.match, e, l, core, cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Session matching for one section.
// ---------------------------------------------------------------------------

namespace detail {

struct SectionQuestions {
  std::vector<const schema::Question*> all;   // section order
  std::vector<const schema::Question*> cores;
  std::vector<const schema::Question*> optionals;
};

inline SectionQuestions split_questions(const schema::QuestionSet& s) {
  SectionQuestions out;
  for (const auto& q : s.questions) {
    out.all.push_back(&q);
    (q.core ? out.cores : out.optionals).push_back(&q);
  }
  return out;
}

// (utterance id, qid) pairs scoring strictly above the threshold
inline std::set<std::pair<int, std::string>> sel_pairs(const MatchList& r, double threshold) {
  std::set<std::pair<int, std::string>> out;
  for (const auto& t : r)
    if (t.score > threshold) out.insert({t.utterance_id, t.qid});
  return out;
}

// Gap matching has no section gate: similarity plus monotone assignment over
// a slice of the transcript.
inline MatchList slice_match(const corpus::Transcript& t, int lo, int hi,
                             const std::vector<const schema::Question*>& questions,
                             textsim::Channel channel, textsim::EmbeddingProvider* provider) {
  MatchList out;
  if (questions.empty() || hi - lo <= 1) return out;
  std::vector<std::string> texts;
  std::vector<int> ids;
  for (int u = lo + 1; u < hi; ++u) {
    texts.push_back(t.utterances[u].text);
    ids.push_back(t.utterances[u].id);
  }
  textsim::SimilarityMatrix s;
  if (channel == textsim::Channel::levenshtein)
    s = textsim::similarity_matrix(texts, question_texts(questions), channel, nullptr);
  else
    s = textsim::similarity_matrix(texts, question_texts(questions), channel, provider);
  const auto assignment = sequence_alignment(s);
  for (std::size_t c = 0; c < assignment.size(); ++c)
    if (assignment[c] != npos)
      out.push_back({ids[assignment[c]], questions[c]->qid, s.at(assignment[c], c)});
  std::sort(out.begin(), out.end(),
            [](const MatchTuple& a, const MatchTuple& b) { return a.utterance_id < b.utterance_id; });
  return out;
}

}  // namespace detail

// Matches the questions of section k against the whole transcript. The result
// is ascending by utterance and ends with an empty-qid marker at the section's
// end boundary. Throws SectionAbsent when the gate fails on both channels.
inline MatchList session_match(const corpus::Transcript& t, const schema::Schema& schema,
                               std::size_t k, textsim::EmbeddingProvider* provider,
                               const SegmentConfig& cfg = {}) {
  const auto& sections = schema.sections();
  if (k >= sections.size()) throw SchemaError("section index out of range");
  if (t.utterances.empty()) throw SectionAbsent("empty transcript");

  std::vector<detail::SectionQuestions> qs;
  qs.reserve(sections.size());
  for (const auto& s : sections) qs.push_back(detail::split_questions(s));

  // Raw per-section, per-channel section matches.
  std::vector<MatchList> raw_e(sections.size()), raw_l(sections.size());
  for (std::size_t j = 0; j < sections.size(); ++j) {
    raw_e[j] = section_match(t, qs[j].cores, textsim::Channel::embedding, provider, cfg);
    raw_l[j] = section_match(t, qs[j].cores, textsim::Channel::levenshtein, nullptr, cfg);
  }
  if (raw_e[k].empty() && raw_l[k].empty())
    throw SectionAbsent("section " + sections[k].section_id + " failed the match gate");

  // Strip utterances other sections claim more strongly.
  MatchList ch_e = raw_e[k], ch_l = raw_l[k];
  for (std::size_t j = 0; j < sections.size(); ++j) {
    if (j == k) continue;
    ch_e = remove_overlap(ch_e, raw_e[j], cfg).first;
    ch_l = remove_overlap(ch_l, raw_l[j], cfg).first;
  }

  // Anchors: pairs both channels agree on, carrying the embedding score.
  const auto pairs_e = detail::sel_pairs(ch_e, cfg.anchor_embed);
  const auto pairs_l = detail::sel_pairs(ch_l, cfg.anchor_lev);
  MatchList anchors;
  for (const auto& tup : ch_e)
    if (tup.score > cfg.anchor_embed && pairs_l.count({tup.utterance_id, tup.qid}))
      anchors.push_back(tup);

  // Section end: the first utterance the next section matched, else the last
  // utterance of the transcript.
  int sentinel = t.utterances.back().id;
  if (k + 1 < sections.size() && !raw_e[k + 1].empty())
    sentinel = raw_e[k + 1].front().utterance_id;
  bool sentinel_collides = false;
  for (const auto& a : anchors) sentinel_collides |= a.utterance_id == sentinel;
  if (!sentinel_collides) anchors.push_back({sentinel, "", 0.0});
  std::sort(anchors.begin(), anchors.end(),
            [](const MatchTuple& a, const MatchTuple& b) { return a.utterance_id < b.utterance_id; });

  std::set<std::string> matched;
  for (const auto& a : anchors)
    if (!a.qid.empty()) matched.insert(a.qid);

  // Optional questions between consecutive anchors, dual-thresholded like the
  // anchors themselves.
  MatchList optionals;
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    if (anchors[i].qid.empty()) continue;
    std::vector<const schema::Question*> related;
    for (const auto* q : qs[k].optionals)
      if (!matched.count(q->qid) && schema.core_ancestor(q->qid) == anchors[i].qid)
        related.push_back(q);
    if (related.empty()) continue;
    const auto m_e = detail::slice_match(t, anchors[i].utterance_id, anchors[i + 1].utterance_id,
                                         related, textsim::Channel::embedding, provider);
    const auto m_l = detail::slice_match(t, anchors[i].utterance_id, anchors[i + 1].utterance_id,
                                         related, textsim::Channel::levenshtein, nullptr);
    const auto p_l = detail::sel_pairs(m_l, cfg.anchor_lev);
    for (const auto& tup : m_e)
      if (tup.score > cfg.anchor_embed && p_l.count({tup.utterance_id, tup.qid}))
        optionals.push_back(tup);
  }
  MatchList v = anchors;
  v.insert(v.end(), optionals.begin(), optionals.end());
  std::sort(v.begin(), v.end(),
            [](const MatchTuple& a, const MatchTuple& b) { return a.utterance_id < b.utterance_id; });
  for (const auto& tup : v)
    if (!tup.qid.empty()) matched.insert(tup.qid);

  // Index of each question in section order, for "between the anchors".
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < qs[k].all.size(); ++i) order[qs[k].all[i]->qid] = i;
  const std::size_t past_end = qs[k].all.size();

  // Remaining questions, matched per gap by the bipartite objective.
  MatchList extras;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const std::size_t lo_order = v[i].qid.empty() ? past_end : order.at(v[i].qid);
    const std::size_t hi_order = v[i + 1].qid.empty() ? past_end : order.at(v[i + 1].qid);
    if (lo_order >= past_end) continue;
    std::vector<const schema::Question*> candidates;
    for (const auto* q : qs[k].all) {
      const std::size_t o = order.at(q->qid);
      if (!matched.count(q->qid) && o > lo_order && o < hi_order) candidates.push_back(q);
    }
    const int lo = v[i].utterance_id, hi = v[i + 1].utterance_id;
    if (candidates.empty() || hi - lo <= 1) continue;

    std::vector<std::string> texts;
    std::vector<int> ids;
    for (int u = lo + 1; u < hi; ++u) {
      texts.push_back(t.utterances[u].text);
      ids.push_back(t.utterances[u].id);
    }
    const auto qt = question_texts(candidates);
    const auto e = textsim::similarity_matrix(texts, qt, textsim::Channel::embedding, provider);
    const auto l = textsim::similarity_matrix(texts, qt, textsim::Channel::levenshtein, nullptr);
    std::vector<bool> core_flags;
    for (const auto* q : candidates) core_flags.push_back(q->core);
    const auto bip = final_bipartite(e, l, core_flags, cfg);
    for (std::size_t c = 0; c < bip.match.size(); ++c)
      if (bip.match[c] != npos) {
        extras.push_back({ids[bip.match[c]], candidates[c]->qid, e.at(bip.match[c], c)});
        matched.insert(candidates[c]->qid);
      }
  }

  MatchList result = v;
  result.insert(result.end(), extras.begin(), extras.end());
  std::sort(result.begin(), result.end(),
            [](const MatchTuple& a, const MatchTuple& b) { return a.utterance_id < b.utterance_id; });
  return result;
}

// ---------------------------------------------------------------------------
// Whole-interview segmentation.
// ---------------------------------------------------------------------------

struct Session {
  std::string qid;
  int start_utt = 0;  // utterance voicing the question
  int end_utt = 0;    // exclusive
};

struct SectionSegments {
  std::string section_id;
  bool present = false;
  std::vector<Session> sessions;
};

struct SegmentedInterview {
  std::string interview_id;
  std::vector<SectionSegments> sections;
};

// Converts a match list into half-open sessions: each matched question runs
// from its utterance to the next tuple's utterance. Empty spans are dropped.
inline std::vector<Session> sessions_from_matches(const MatchList& matches) {
  std::vector<Session> out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].qid.empty()) continue;
    const int start = matches[i].utterance_id;
    const int end = i + 1 < matches.size() ? matches[i + 1].utterance_id : start;
    if (end > start) out.push_back({matches[i].qid, start, end});
  }
  return out;
}

inline SegmentedInterview segment_interview(const corpus::Transcript& t,
                                            const schema::Schema& schema,
                                            textsim::EmbeddingProvider* provider,
                                            const SegmentConfig& cfg = {}) {
  SegmentedInterview out;
  out.interview_id = t.interview_id;
  for (std::size_t k = 0; k < schema.sections().size(); ++k) {
    SectionSegments sec;
    sec.section_id = schema.sections()[k].section_id;
    try {
      const MatchList matches = session_match(t, schema, k, provider, cfg);
      sec.present = true;
      sec.sessions = sessions_from_matches(matches);
    } catch (const SectionAbsent&) {
      sec.present = false;
    }
    out.sections.push_back(std::move(sec));
  }
  return out;
}

inline Json segmented_to_json(const SegmentedInterview& seg) {
  Json j;
  j["interview_id"] = seg.interview_id;
  Json sections = Json::array();
  for (const auto& s : seg.sections) {
    Json sj;
    sj["section_id"] = s.section_id;
    sj["present"] = s.present;
    Json sessions = Json::array();
    for (const auto& sess : s.sessions) {
      Json e;
      e["qid"] = sess.qid;
      e["start_utt"] = sess.start_utt;
      e["end_utt"] = sess.end_utt;
      sessions.push_back(std::move(e));
    }
    sj["sessions"] = std::move(sessions);
    sections.push_back(std::move(sj));
  }
  j["sections"] = std::move(sections);
  return j;
}

inline SegmentedInterview segmented_from_json(const Json& j, const std::string& where) {
  SegmentedInterview seg;
  seg.interview_id = jsonio::require_string(j, "interview_id", where);
  const Json& sections = jsonio::require(j, "sections", where);
  if (!sections.is_array()) throw SchemaError(where + ": sections must be an array");
  for (const auto& sj : sections) {
    SectionSegments sec;
    sec.section_id = jsonio::require_string(sj, "section_id", where);
    sec.present = jsonio::require(sj, "present", where).get<bool>();
    if (sj.contains("sessions")) {
      for (const auto& e : sj.at("sessions")) {
        Session sess;
        sess.qid = jsonio::require_string(e, "qid", where);
        sess.start_utt = static_cast<int>(jsonio::require_int(e, "start_utt", where));
        sess.end_utt = static_cast<int>(jsonio::require_int(e, "end_utt", where));
        sec.sessions.push_back(std::move(sess));
      }
    }
    seg.sections.push_back(std::move(sec));
  }
  return seg;
}

}  // namespace ivpipe::segment

namespace ivpipe::schema {

// Sessions answering the given variable, in transcript order. Empty when the
// variable's section is absent or none of its questions matched.
inline std::vector<segment::Session> resolve_variable_sessions(
    const VariableSpec& var, const segment::SegmentedInterview& seg, const Schema& schema) {
  std::vector<segment::Session> out;
  std::set<std::string> qids;
  for (const auto* q : schema.questions_for_variable(var.var_id)) qids.insert(q->qid);
  for (const auto& sec : seg.sections) {
    if (sec.section_id != var.section_id || !sec.present) continue;
    for (const auto& sess : sec.sessions)
      if (qids.count(sess.qid)) out.push_back(sess);
  }
  std::sort(out.begin(), out.end(), [](const segment::Session& a, const segment::Session& b) {
    return a.start_utt < b.start_utt;
  });
  return out;
}

}  // namespace ivpipe::schema
