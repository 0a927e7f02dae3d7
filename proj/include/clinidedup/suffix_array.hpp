// Copyright 2026 The clinidedup Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLINIDEDUP_SUFFIX_ARRAY_HPP_
#define CLINIDEDUP_SUFFIX_ARRAY_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

namespace clinidedup {

namespace detail {

template <class Index, class Sym>
std::vector<Index> sa_naive(std::span<const Sym> s) {
  const auto n = static_cast<Index>(s.size());
  std::vector<Index> sa(static_cast<std::size_t>(n));
  std::iota(sa.begin(), sa.end(), Index{0});
  std::sort(sa.begin(), sa.end(), [&](Index a, Index b) {
    if (a == b) return false;
    while (a < n && b < n) {
      if (s[a] != s[b]) return s[a] < s[b];
      ++a;
      ++b;
    }
    return a == n;
  });
  return sa;
}

// Induced sorting (SA-IS). Symbols lie in [0, upper]. Linear time.
template <class Index, class Sym>
std::vector<Index> sa_is(std::span<const Sym> s, Index upper) {
  static_assert(std::is_signed_v<Index>, "SA-IS uses -1 as an empty marker");
  const auto n = static_cast<Index>(s.size());
  if (n == 0) return {};
  if (n == 1) return {Index{0}};
  if (n == 2) {
    if (s[0] < s[1]) return {Index{0}, Index{1}};
    return {Index{1}, Index{0}};
  }
  if (n < 10) return sa_naive<Index, Sym>(s);

  const auto sym = [&](Index i) { return static_cast<Index>(s[static_cast<std::size_t>(i)]); };
  const auto U = static_cast<std::size_t>(upper);

  std::vector<Index> sa(static_cast<std::size_t>(n));
  // ls[i]: suffix i is S-type (smaller than suffix i+1).
  std::vector<bool> ls(static_cast<std::size_t>(n));
  for (Index i = n - 2; i >= 0; --i) {
    ls[i] = (sym(i) == sym(i + 1)) ? ls[i + 1] : (sym(i) < sym(i + 1));
  }
  // sum_l[c]: start of bucket c; sum_s[c]: start of the S-part of bucket c.
  std::vector<Index> sum_l(U + 1), sum_s(U + 1);
  for (Index i = 0; i < n; ++i) {
    if (!ls[i]) {
      ++sum_s[sym(i)];
    } else {
      ++sum_l[sym(i) + 1];
    }
  }
  for (std::size_t c = 0; c <= U; ++c) {
    sum_s[c] += sum_l[c];
    if (c < U) sum_l[c + 1] += sum_s[c];
  }

  std::vector<Index> buf(U + 1);
  const auto induce = [&](const std::vector<Index>& lms) {
    std::fill(sa.begin(), sa.end(), Index{-1});
    std::copy(sum_s.begin(), sum_s.end(), buf.begin());
    for (Index d : lms) {
      if (d == n) continue;
      sa[buf[sym(d)]++] = d;
    }
    std::copy(sum_l.begin(), sum_l.end(), buf.begin());
    sa[buf[sym(n - 1)]++] = n - 1;
    for (Index i = 0; i < n; ++i) {
      const Index v = sa[i];
      if (v >= 1 && !ls[v - 1]) sa[buf[sym(v - 1)]++] = v - 1;
    }
    std::copy(sum_l.begin(), sum_l.end(), buf.begin());
    for (Index i = n - 1; i >= 0; --i) {
      const Index v = sa[i];
      if (v >= 1 && ls[v - 1]) sa[--buf[sym(v - 1) + 1]] = v - 1;
    }
  };

  std::vector<Index> lms_map(static_cast<std::size_t>(n) + 1, Index{-1});
  Index m = 0;
  for (Index i = 1; i < n; ++i) {
    if (!ls[i - 1] && ls[i]) lms_map[i] = m++;
  }
  std::vector<Index> lms;
  lms.reserve(static_cast<std::size_t>(m));
  for (Index i = 1; i < n; ++i) {
    if (!ls[i - 1] && ls[i]) lms.push_back(i);
  }

  induce(lms);

  if (m) {
    std::vector<Index> sorted_lms;
    sorted_lms.reserve(static_cast<std::size_t>(m));
    for (Index v : sa) {
      if (lms_map[v] != -1) sorted_lms.push_back(v);
    }
    std::vector<Index> rec_s(static_cast<std::size_t>(m));
    Index rec_upper = 0;
    rec_s[lms_map[sorted_lms[0]]] = 0;
    for (Index i = 1; i < m; ++i) {
      Index l = sorted_lms[i - 1], r = sorted_lms[i];
      const Index end_l = (lms_map[l] + 1 < m) ? lms[lms_map[l] + 1] : n;
      const Index end_r = (lms_map[r] + 1 < m) ? lms[lms_map[r] + 1] : n;
      bool same = true;
      if (end_l - l != end_r - r) {
        same = false;
      } else {
        while (l < end_l) {
          if (sym(l) != sym(r)) break;
          ++l;
          ++r;
        }
        if (l == n || sym(l) != sym(r)) same = false;
      }
      if (!same) ++rec_upper;
      rec_s[lms_map[sorted_lms[i]]] = rec_upper;
    }
    // Release what the recursion does not need.
    std::vector<Index>().swap(sorted_lms);
    const auto rec_sa = sa_is<Index, Index>(std::span<const Index>(rec_s), rec_upper);
    sorted_lms.resize(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) sorted_lms[i] = lms[rec_sa[i]];
    induce(sorted_lms);
  }
  return sa;
}

}  // namespace detail

/// Suffix array of a byte string: the start offsets of all suffixes in
/// lexicographic (unsigned byte) order. `Index` must be a signed integer
/// wide enough for text.size().
template <class Index = std::int32_t>
std::vector<Index> build_suffix_array(std::string_view text) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
  return detail::sa_is<Index, unsigned char>(std::span<const unsigned char>(bytes, text.size()),
                                             Index{255});
}

/// LCP array (Kasai et al.): lcp[i] is the length of the longest common
/// prefix of the suffixes at sa[i-1] and sa[i]; lcp[0] = 0.
template <class Index>
std::vector<Index> build_lcp_array(std::string_view text, const std::vector<Index>& sa) {
  const auto n = static_cast<Index>(text.size());
  std::vector<Index> rank(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rank[sa[i]] = i;
  std::vector<Index> lcp(static_cast<std::size_t>(n), Index{0});
  Index h = 0;
  for (Index i = 0; i < n; ++i) {
    if (rank[i] == 0) {
      h = 0;
      continue;
    }
    const Index j = sa[rank[i] - 1];
    while (i + h < n && j + h < n && text[i + h] == text[j + h]) ++h;
    lcp[rank[i]] = h;
    if (h > 0) --h;
  }
  return lcp;
}

}  // namespace clinidedup

#endif  // CLINIDEDUP_SUFFIX_ARRAY_HPP_
