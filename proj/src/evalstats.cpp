#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "nof1/atypicality.hpp"
#include "nof1/evalstats.hpp"
#include "nof1/parallel.hpp"
#include "nof1/textio.hpp"

namespace nof1 {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

bool has_both(std::span<const int> y) {
  bool pos = false, neg = false;
  for (int v : y) (v ? pos : neg) = true;
  return pos && neg;
}

struct Replicate {
  std::array<double, 4> delta{};
  int redraws = 0;
};

template <class T>
std::vector<T> gather(std::span<const T> src, std::span<const std::size_t> idx) {
  std::vector<T> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = src[idx[k]];
  return out;
}

}  // namespace

BootstrapSummary paired_bootstrap(const BootstrapInput& in, int resamples, std::uint64_t seed,
                                  const Resampler& resampler) {
  const std::size_t n = in.labels.size();
  if (n == 0 || in.atypicality.size() != n || in.scores_mono.size() != n ||
      in.scores_multi.size() != n)
    throw std::invalid_argument("bootstrap: inputs must be non-empty and aligned");
  if (resamples < 1) throw std::invalid_argument("bootstrap: B must be >= 1");

  constexpr int kMaxRedraws = 10000;
  std::vector<Replicate> reps(static_cast<std::size_t>(resamples));
  parallel_for(reps.size(), [&](std::size_t b) {
    Rng rng(derive_seed(seed, {b}));
    std::vector<std::size_t> idx(n);
    Replicate& rep = reps[b];
    for (int attempt = 0;; ++attempt) {
      if (attempt > kMaxRedraws) throw std::runtime_error("bootstrap: too many degenerate redraws");
      if (resampler)
        resampler(static_cast<int>(b), rng, idx);
      else
        for (auto& i : idx) i = rng.index(n);
      const auto y = gather(in.labels, idx);
      const auto m = gather(in.atypicality, idx);
      const auto pm = gather(in.scores_mono, idx);
      const auto pa = gather(in.scores_multi, idx);
      const auto tail = select_tail(m, in.tail_fraction).indices;
      const auto yt = gather<int>(y, tail);
      if (!has_both(y) || !has_both(yt)) {
        ++rep.redraws;
        continue;
      }
      const auto pmt = gather<double>(pm, tail);
      const auto pat = gather<double>(pa, tail);
      rep.delta[0] = auc_value(pa, y) - auc_value(pm, y);
      rep.delta[1] = accuracy(pa, y) - accuracy(pm, y);
      rep.delta[2] = auc_value(pat, yt) - auc_value(pmt, yt);
      rep.delta[3] = accuracy(pat, yt) - accuracy(pmt, yt);
      break;
    }
  });

  BootstrapSummary out;
  out.resamples = resamples;
  const std::array<const char*, 4> names{"dAUC_overall", "dACC_overall", "dAUC_tail", "dACC_tail"};
  const double floor_p = 1.0 / (resamples + 1.0);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> d(reps.size());
    for (std::size_t b = 0; b < reps.size(); ++b) d[b] = reps[b].delta[k];
    BootstrapDelta bd;
    bd.metric = names[k];
    bd.p2_5 = quantile(d, 0.025);
    bd.median = quantile(d, 0.5);
    bd.p97_5 = quantile(d, 0.975);
    const auto le = static_cast<double>(std::count_if(d.begin(), d.end(), [](double v) { return v <= 0; }));
    const auto ge = static_cast<double>(std::count_if(d.begin(), d.end(), [](double v) { return v >= 0; }));
    const auto B = static_cast<double>(d.size());
    if (le == 0 || ge == 0) {
      bd.p = 0.0;
      bd.no_crossings = true;
      out.notes.push_back(std::string(names[k]) + ": no replicate crosses zero; p reported as 0 (floor " +
                          format_number(floor_p, 6) + ")");
    } else {
      bd.p = std::min(1.0, std::max(2.0 * std::min(le, ge) / B, floor_p));
    }
    out.deltas.push_back(bd);
  }
  for (const auto& r : reps) out.redraws += r.redraws;
  if (out.redraws > 0)
    out.notes.push_back("redrew " + std::to_string(out.redraws) + " degenerate resamples");
  return out;
}

}  // namespace nof1
