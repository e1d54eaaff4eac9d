// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rcss {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

bool silent(const std::vector<double>& x) {
  for (double v : x) {
    if (v != 0.0) return false;
  }
  return true;
}

double cap_db(double db) {
  return std::clamp(db, -kSiSnrCapDb, kSiSnrCapDb);
}

// Maximal runs where exactly one speaker is active, with the owner.
struct SoloRegion {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  int speaker = 0;
};

std::vector<SoloRegion> solo_regions(
    std::size_t total, const std::vector<std::vector<Interval>>& activity) {
  // Edge counters per sample; the sum of open intervals' speaker indices
  // identifies the owner whenever exactly one interval is open.
  std::vector<int> count(total + 1, 0);
  std::vector<int> owner(total + 1, 0);
  for (std::size_t s = 0; s < activity.size(); ++s) {
    for (const auto& iv : activity[s]) {
      count[std::size_t(iv.begin)] += 1;
      count[std::size_t(iv.end)] -= 1;
      owner[std::size_t(iv.begin)] += int(s);
      owner[std::size_t(iv.end)] -= int(s);
    }
  }
  std::vector<SoloRegion> regions;
  int active = 0;
  int active_owner = 0;
  bool in_solo = false;
  SoloRegion cur;
  for (std::size_t i = 0; i < total; ++i) {
    active += count[i];
    active_owner += owner[i];
    const bool solo = active == 1;
    if (solo && !in_solo) {
      cur.begin = Eigen::Index(i);
      cur.speaker = active_owner;
      in_solo = true;
    } else if (in_solo && (!solo || active_owner != cur.speaker)) {
      cur.end = Eigen::Index(i);
      regions.push_back(cur);
      in_solo = false;
      if (solo) {
        cur.begin = Eigen::Index(i);
        cur.speaker = active_owner;
        in_solo = true;
      }
    }
  }
  if (in_solo) {
    cur.end = Eigen::Index(total);
    regions.push_back(cur);
  }
  return regions;
}

}  // namespace

double si_snr(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size()) {
    throw std::invalid_argument("si_snr: length mismatch");
  }
  const double ref_energy = dot(ref, ref);
  if (ref_energy <= 0.0) {
    throw std::invalid_argument("si_snr: silent reference");
  }
  const double scale = dot(est, ref) / ref_energy;
  double target = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = scale * ref[i];
    const double e = est[i] - t;
    target += t * t;
    error += e * e;
  }
  if (error <= 0.0) return kSiSnrCapDb;
  if (target <= 0.0) return -kSiSnrCapDb;
  return cap_db(10.0 * std::log10(target / error));
}

PitResult pit_si_snr(const std::vector<std::vector<double>>& channels,
                     const std::vector<std::vector<double>>& refs) {
  if (channels.empty()) {
    throw std::invalid_argument("pit_si_snr: no channels");
  }
  std::vector<std::size_t> scored;  // non-silent reference indices
  for (std::size_t r = 0; r < refs.size(); ++r) {
    if (!silent(refs[r])) scored.push_back(r);
  }
  if (scored.empty()) {
    throw std::invalid_argument("pit_si_snr: every reference is silent");
  }
  if (scored.size() > channels.size()) {
    throw std::invalid_argument("pit_si_snr: more references than channels");
  }

  // Pairwise scores once, then an exhaustive scan over channel orderings.
  RealMatrix score(scored.size(), channels.size());
  for (std::size_t r = 0; r < scored.size(); ++r) {
    for (std::size_t c = 0; c < channels.size(); ++c) {
      score(Eigen::Index(r), Eigen::Index(c)) =
          si_snr(channels[c], refs[scored[r]]);
    }
  }
  std::vector<int> order(channels.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> best_order;
  double best = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < scored.size(); ++r) {
      total += score(Eigen::Index(r), order[r]);
    }
    if (total > best) {
      best = total;
      best_order.assign(order.begin(), order.begin() + long(scored.size()));
    }
  } while (std::next_permutation(order.begin(), order.end()));

  PitResult out;
  out.assignment.assign(refs.size(), -1);
  out.per_ref_db.assign(refs.size(),
                        std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < scored.size(); ++r) {
    out.assignment[scored[r]] = best_order[r];
    out.per_ref_db[scored[r]] = score(Eigen::Index(r), best_order[r]);
  }
  out.mean_db = best / double(scored.size());
  return out;
}

double pit_si_snr_improvement(const std::vector<std::vector<double>>& channels,
                              const std::vector<std::vector<double>>& refs,
                              const std::vector<double>& mixture) {
  const PitResult best = pit_si_snr(channels, refs);
  double mix_sum = 0.0;
  int scored = 0;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    if (silent(refs[r])) continue;
    mix_sum += si_snr(mixture, refs[r]);
    ++scored;
  }
  return best.mean_db - mix_sum / double(scored);
}

std::optional<double> leakage_db(
    const std::vector<std::vector<double>>& channels,
    const std::vector<std::vector<Interval>>& activity,
    const std::vector<int>& speaker_to_channel, Eigen::Index guard) {
  if (channels.empty()) {
    throw std::invalid_argument("leakage_db: no channels");
  }
  if (speaker_to_channel.size() != activity.size()) {
    throw std::invalid_argument("leakage_db: assignment/activity mismatch");
  }
  const std::size_t total = channels[0].size();
  double on_energy = 0.0;
  double off_energy = 0.0;
  for (const SoloRegion& region : solo_regions(total, activity)) {
    const Eigen::Index begin = region.begin + guard;
    const Eigen::Index end = region.end - guard;
    if (end <= begin) continue;
    const int on = speaker_to_channel[std::size_t(region.speaker)];
    if (on < 0 || std::size_t(on) >= channels.size()) continue;
    for (Eigen::Index i = begin; i < end; ++i) {
      for (std::size_t c = 0; c < channels.size(); ++c) {
        const double v = channels[c][std::size_t(i)];
        if (int(c) == on) {
          on_energy += v * v;
        } else {
          off_energy += v * v;
        }
      }
    }
  }
  if (on_energy <= 0.0) return std::nullopt;
  if (off_energy <= 0.0) return kLeakageFloorDb;
  return std::max(kLeakageFloorDb, 10.0 * std::log10(off_energy / on_energy));
}

std::optional<double> counting_accuracy(
    const std::vector<BlockLogEntry>& blocks,
    const std::vector<int>& truth_counts) {
  if (blocks.size() != truth_counts.size()) {
    throw std::invalid_argument("counting_accuracy: block count mismatch");
  }
  int counted = 0;
  int correct = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].iterations < 0) continue;  // backend without counting
    ++counted;
    if (blocks[k].iterations == truth_counts[k]) ++correct;
  }
  if (counted == 0) return std::nullopt;
  return double(correct) / double(counted);
}

int count_channel_switches(const std::vector<Mask>& global_masks,
                           const MagnitudeSpectrogram& mixture_mag,
                           const std::vector<MagnitudeSpectrogram>& ref_mags,
                           const std::vector<BlockRange>& blocks,
                           double activity_threshold) {
  int switches = 0;
  std::vector<int> last_channel(ref_mags.size(), -1);
  for (const auto& block : blocks) {
    const Eigen::Index rows = block.current_end - block.current_begin;
    if (rows <= 0) continue;
    const double mix_energy = mixture_mag.data
                                  .middleRows(block.current_begin, rows)
                                  .square()
                                  .sum();
    for (std::size_t s = 0; s < ref_mags.size(); ++s) {
      auto ref_rows = ref_mags[s].data.middleRows(block.current_begin, rows);
      const double energy = ref_rows.square().sum();
      if (mix_energy <= 0.0 || energy / mix_energy <= activity_threshold) {
        continue;
      }
      int channel = -1;
      double best = -1.0;
      for (std::size_t c = 0; c < global_masks.size(); ++c) {
        const double captured =
            (global_masks[c].data.middleRows(block.current_begin, rows) *
             ref_rows)
                .square()
                .sum();
        if (captured > best) {
          best = captured;
          channel = int(c);
        }
      }
      if (last_channel[s] >= 0 && channel != last_channel[s]) {
        ++switches;
      }
      last_channel[s] = channel;
    }
  }
  return switches;
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string report_csv(const EvalReport& report) {
  std::string out =
      "session,condition,si_snr_db,si_snri_db,leakage_db,counting_accuracy,"
      "overflow,realized_overlap\n";
  double snr = 0.0;
  double snri = 0.0;
  for (const auto& row : report.sessions) {
    out += row.session + ',' + row.condition + ',';
    out += format_fixed(row.si_snr_db) + ',' + format_fixed(row.si_snri_db);
    out += ',';
    out += row.leakage ? format_fixed(*row.leakage) : std::string("n/a");
    out += ',';
    out += row.counting ? format_fixed(*row.counting) : std::string("n/a");
    out += ',' + std::to_string(row.overflow);
    out += ',' + format_fixed(row.realized_overlap) + '\n';
    snr += row.si_snr_db;
    snri += row.si_snri_db;
  }
  if (!report.sessions.empty()) {
    const double n = double(report.sessions.size());
    out += "mean,,";
    out += format_fixed(snr / n) + ',' + format_fixed(snri / n) + ",,,,\n";
  }
  return out;
}

}  // namespace rcss
