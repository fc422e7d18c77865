#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ivpipe/corpus.hpp"
#include "ivpipe/errors.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::align {

// A word in a flattened transcript, with its normalized form and provenance.
struct StreamWord {
  std::string raw;
  std::string norm;  // empty when the word is punctuation only; never matches
  std::size_t utterance = 0;
  std::optional<std::int64_t> start_ms;
  std::optional<std::int64_t> end_ms;
};

inline std::vector<StreamWord> flatten(const corpus::Transcript& t) {
  std::vector<StreamWord> out;
  for (std::size_t ui = 0; ui < t.utterances.size(); ++ui) {
    const auto& u = t.utterances[ui];
    if (!u.words.empty()) {
      for (const auto& w : u.words)
        out.push_back({w.text, text::normalize(w.text), ui, w.start_ms, w.end_ms});
    } else {
      for (const auto& tok : text::split_ws(u.text))
        out.push_back({tok, text::normalize(tok), ui, {}, {}});
    }
  }
  return out;
}

struct WordAlignment {
  // (left index, right index), strictly increasing on both sides
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> unmatched_left;
  std::vector<std::size_t> unmatched_right;
};

// Maximum-cardinality monotone matching of equal normalized words, the
// classic longest-common-subsequence table. The forward backtrace takes a
// match whenever one is consistent with optimality, which pins ties to the
// earliest right-side index. Quadratic in the stream lengths; callers feed
// it single interviews, not corpora.
inline WordAlignment align_words(const std::vector<std::string>& left,
                                 const std::vector<std::string>& right) {
  const std::size_t n = left.size(), m = right.size();
  constexpr std::size_t kMaxCells = 128ull * 1024 * 1024;
  if (n != 0 && m != 0 && n > kMaxCells / m)
    throw Error("word alignment over " + std::to_string(n) + "x" + std::to_string(m) +
                " words exceeds the supported size");

  // lcs[i][j] = best match count for suffixes left[i..], right[j..]
  std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
  auto eq = [&](std::size_t i, std::size_t j) {
    return !left[i].empty() && left[i] == right[j];
  };
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;) {
      std::uint32_t best = std::max(at(i + 1, j), at(i, j + 1));
      if (eq(i, j)) best = std::max(best, at(i + 1, j + 1) + 1);
      at(i, j) = best;
    }

  WordAlignment out;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (eq(i, j) && at(i, j) == at(i + 1, j + 1) + 1) {
      out.pairs.emplace_back(i, j);
      ++i;
      ++j;
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      out.unmatched_left.push_back(i++);
    } else {
      out.unmatched_right.push_back(j++);
    }
  }
  while (i < n) out.unmatched_left.push_back(i++);
  while (j < m) out.unmatched_right.push_back(j++);
  return out;
}

// ---------------------------------------------------------------------------
// Dual-transcript merge: speakers from the diarized pass, words from the
// verbatim pass.
// ---------------------------------------------------------------------------

struct MergeOutcome {
  bool ok = false;
  corpus::Transcript transcript;  // valid only when ok
  std::string error;              // alignment failure, reported not thrown
  std::size_t dropped_utterances = 0;  // diarized turns with no aligned word
};

namespace detail {

struct TurnSpan {
  std::size_t diarized_utt;
  std::size_t vfirst, vlast;  // inclusive verbatim word range
};

// Splits the orphan words of one gap between the surrounding turns, returning
// how many go to the preceding turn. With full timestamps each word prefers
// the closer side; the first word preferring the following turn fixes the
// split so spans stay contiguous. Without timestamps everything goes to the
// preceding turn.
inline std::size_t gap_split(const std::vector<StreamWord>& v, std::size_t lo, std::size_t hi,
                             const StreamWord& prev_word, const StreamWord& next_word) {
  std::size_t to_prev = hi - lo;
  for (std::size_t k = lo; k < hi; ++k) {
    const auto& w = v[k];
    if (!w.start_ms || !w.end_ms || !prev_word.end_ms || !next_word.start_ms) continue;
    const auto d_prev = *w.start_ms - *prev_word.end_ms;
    const auto d_next = *next_word.start_ms - *w.end_ms;
    if (d_next < d_prev) {
      to_prev = k - lo;
      break;
    }
  }
  return to_prev;
}

}  // namespace detail

inline MergeOutcome merge_transcripts(const corpus::Transcript& diarized,
                                      const corpus::Transcript& verbatim) {
  MergeOutcome out;
  const auto dwords = flatten(diarized);
  const auto vwords = flatten(verbatim);

  std::vector<std::string> dnorm, vnorm;
  dnorm.reserve(dwords.size());
  vnorm.reserve(vwords.size());
  for (const auto& w : dwords) dnorm.push_back(w.norm);
  for (const auto& w : vwords) vnorm.push_back(w.norm);
  const WordAlignment wa = align_words(dnorm, vnorm);

  // verbatim anchor range per diarized utterance
  std::vector<std::optional<std::pair<std::size_t, std::size_t>>> range(
      diarized.utterances.size());
  for (const auto& [di, vi] : wa.pairs) {
    const std::size_t ui = dwords[di].utterance;
    if (!range[ui])
      range[ui] = {vi, vi};
    else
      range[ui]->second = vi;
  }

  std::vector<detail::TurnSpan> spans;
  for (std::size_t ui = 0; ui < range.size(); ++ui) {
    if (range[ui])
      spans.push_back({ui, range[ui]->first, range[ui]->second});
    else
      ++out.dropped_utterances;
  }
  if (spans.empty()) {
    out.error = "no diarized utterance aligned to the verbatim stream";
    return out;
  }

  // Attach every verbatim word outside a span to a neighbouring turn.
  // extra[k] = words handed to turn k beyond its anchor range.
  std::vector<std::pair<std::size_t, std::size_t>> bounds(spans.size());
  for (std::size_t k = 0; k < spans.size(); ++k) bounds[k] = {spans[k].vfirst, spans[k].vlast};
  bounds.front().first = 0;
  bounds.back().second = vwords.size() - 1;
  for (std::size_t k = 0; k + 1 < spans.size(); ++k) {
    const std::size_t lo = spans[k].vlast + 1;
    const std::size_t hi = spans[k + 1].vfirst;  // exclusive
    if (lo >= hi) continue;
    const std::size_t to_prev =
        detail::gap_split(vwords, lo, hi, vwords[spans[k].vlast], vwords[spans[k + 1].vfirst]);
    bounds[k].second = spans[k].vlast + to_prev;
    bounds[k + 1].first = lo + to_prev;
  }

  corpus::Transcript merged;
  merged.interview_id = diarized.interview_id;
  merged.source = corpus::Source::merged;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    corpus::Utterance u;
    u.id = static_cast<int>(k);
    u.speaker = diarized.utterances[spans[k].diarized_utt].speaker;
    std::vector<std::string> toks;
    for (std::size_t vi = bounds[k].first; vi <= bounds[k].second; ++vi) {
      u.words.push_back({vwords[vi].raw, vwords[vi].start_ms, vwords[vi].end_ms});
      toks.push_back(vwords[vi].raw);
    }
    u.text = text::join(toks, " ");
    merged.utterances.push_back(std::move(u));
  }
  out.ok = true;
  out.transcript = std::move(merged);
  return out;
}

// ---------------------------------------------------------------------------
// Word error rate
// ---------------------------------------------------------------------------

inline double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw EmptyReference("word error rate against an empty reference");
  if (hyp.empty()) return 1.0;
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

inline double wer(const corpus::Transcript& ref, const corpus::Transcript& hyp) {
  std::vector<std::string> r, h;
  for (const auto& u : ref.utterances)
    for (auto& tok : text::tokenize(u.text)) r.push_back(std::move(tok));
  for (const auto& u : hyp.utterances)
    for (auto& tok : text::tokenize(u.text)) h.push_back(std::move(tok));
  return wer(r, h);
}

// ---------------------------------------------------------------------------
// Text-based diarization error rate: word-align the two transcripts, then
// count aligned words whose speakers disagree plus all unaligned words, over
// the reference word count. Speaker labels are arbitrary, so the numerator is
// minimized over every injective mapping of hypothesis labels onto reference
// labels (exhaustive; label sets are small).
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t best_label_agreement(
    const std::vector<std::vector<std::size_t>>& counts) {  // [hyp label][ref label]
  const std::size_t nh = counts.size();
  const std::size_t nr = nh ? counts[0].size() : 0;
  if (nh > 8 || nr > 8)
    throw Error("diarization scoring supports at most 8 speaker labels per side");
  std::vector<bool> used(nr, false);
  std::size_t best = 0;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t h, std::size_t acc) {
    if (h == nh) {
      best = std::max(best, acc);
      return;
    }
    rec(h + 1, acc);  // leave this hypothesis label unmapped
    for (std::size_t r = 0; r < nr; ++r) {
      if (used[r]) continue;
      used[r] = true;
      rec(h + 1, acc + counts[h][r]);
      used[r] = false;
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace detail

inline double tder(const corpus::Transcript& ref, const corpus::Transcript& hyp) {
  const auto rwords = flatten(ref);
  const auto hwords = flatten(hyp);
  if (rwords.empty()) throw EmptyReference("diarization error against an empty reference");

  std::vector<std::string> rnorm, hnorm;
  for (const auto& w : rwords) rnorm.push_back(w.norm);
  for (const auto& w : hwords) hnorm.push_back(w.norm);
  const WordAlignment wa = align_words(rnorm, hnorm);

  std::map<std::string, std::size_t> rlabel, hlabel;
  for (const auto& u : ref.utterances) rlabel.emplace(u.speaker, rlabel.size());
  for (const auto& u : hyp.utterances) hlabel.emplace(u.speaker, hlabel.size());

  std::vector<std::vector<std::size_t>> counts(hlabel.size(),
                                               std::vector<std::size_t>(rlabel.size(), 0));
  for (const auto& [ri, hi] : wa.pairs) {
    const auto r = rlabel.at(ref.utterances[rwords[ri].utterance].speaker);
    const auto h = hlabel.at(hyp.utterances[hwords[hi].utterance].speaker);
    ++counts[h][r];
  }
  const std::size_t agree = detail::best_label_agreement(counts);
  const std::size_t mismatched = wa.pairs.size() - agree;
  const std::size_t numerator =
      mismatched + wa.unmatched_left.size() + wa.unmatched_right.size();
  return static_cast<double>(numerator) / static_cast<double>(rwords.size());
}

}  // namespace ivpipe::align
