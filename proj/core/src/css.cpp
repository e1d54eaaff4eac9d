// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/css.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "rcss/log.hpp"

namespace rcss {
namespace {

// Stitching enumerates channel permutations, so keep the budget factorial-
// friendly.
constexpr int kMaxStitchChannels = 4;

OracleContext empty_context(Eigen::Index frames, Eigen::Index bins) {
  OracleContext ctx;
  ctx.noise_mag = RealMatrix::Zero(frames, bins);
  return ctx;
}

}  // namespace

void WindowConfig::validate() const {
  if (n_p < 0 || n_f < 0) {
    throw ConfigError("window: past/future frame counts must be >= 0");
  }
  if (n_c < 1) {
    throw ConfigError("window: current region needs at least one frame");
  }
  if (overlap_frames() < 1) {
    throw ConfigError("window: blocks must overlap by at least one frame");
  }
  if (channels < 1 || channels > kMaxStitchChannels) {
    throw ConfigError("window: channels must lie in [1, " +
                      std::to_string(kMaxStitchChannels) + "], got " +
                      std::to_string(channels));
  }
}

WindowConfig window_from_seconds(double block_s, double hop_s,
                                 const StftConfig& stft, int channels,
                                 bool dependency) {
  stft.validate();
  const double fps = stft.frames_per_second();
  WindowConfig cfg;
  cfg.n_c = int(std::lround(hop_s * fps));
  const int t_blk = int(std::lround(block_s * fps));
  const int overlap = t_blk - cfg.n_c;
  if (cfg.n_c < 1 || overlap < 1) {
    throw ConfigError("window: block " + std::to_string(block_s) +
                      " s with hop " + std::to_string(hop_s) +
                      " s leaves no overlap");
  }
  cfg.n_f = int(std::lround(overlap / 4.0));
  cfg.n_p = overlap - cfg.n_f;
  cfg.channels = channels;
  cfg.dependency = dependency;
  cfg.validate();
  return cfg;
}

std::vector<BlockRange> segment(Eigen::Index total_frames,
                                const WindowConfig& cfg) {
  cfg.validate();
  if (total_frames < 1) {
    throw std::invalid_argument("segment: no frames");
  }
  const Eigen::Index t_blk = cfg.block_frames();
  const Eigen::Index n_blocks = (total_frames + cfg.n_c - 1) / cfg.n_c;
  std::vector<BlockRange> blocks;
  blocks.reserve(size_t(n_blocks));
  for (Eigen::Index k = 0; k < n_blocks; ++k) {
    BlockRange b;
    b.index = int(k);
    b.start = k * cfg.n_c - cfg.n_p;
    b.pad_left = std::max<Eigen::Index>(0, -b.start);
    b.pad_right = std::max<Eigen::Index>(0, b.start + t_blk - total_frames);
    b.current_begin = k * cfg.n_c;
    b.current_end = std::min<Eigen::Index>((k + 1) * cfg.n_c, total_frames);
    blocks.push_back(b);
  }
  return blocks;
}

MagnitudeSpectrogram block_magnitude(const MagnitudeSpectrogram& session,
                                     const BlockRange& block,
                                     const WindowConfig& cfg) {
  const Eigen::Index t_blk = cfg.block_frames();
  RealMatrix out = RealMatrix::Zero(t_blk, session.data.cols());
  const Eigen::Index lo = std::max<Eigen::Index>(0, block.start);
  const Eigen::Index hi =
      std::min<Eigen::Index>(session.data.rows(), block.start + t_blk);
  if (hi > lo) {
    out.middleRows(lo - block.start, hi - lo) =
        session.data.middleRows(lo, hi - lo);
  }
  return MagnitudeSpectrogram{std::move(out)};
}

PaddedMasks zero_pad_channels(const std::vector<Mask>& speaker_masks,
                              int channels, Eigen::Index frames,
                              Eigen::Index bins) {
  if (channels < 1) {
    throw std::invalid_argument("zero_pad_channels: channels must be >= 1");
  }
  PaddedMasks out;
  std::vector<std::size_t> keep(speaker_masks.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (int(speaker_masks.size()) > channels) {
    std::stable_sort(keep.begin(), keep.end(),
                     [&](std::size_t a, std::size_t b) {
                       return speaker_masks[a].data.square().sum() >
                              speaker_masks[b].data.square().sum();
                     });
    out.dropped = int(speaker_masks.size()) - channels;
    RCSS_WARN << "channel overflow: dropping " << out.dropped << " mask(s)";
    keep.resize(std::size_t(channels));
    std::sort(keep.begin(), keep.end());  // keep extraction order
  }
  for (std::size_t idx : keep) {
    out.masks.push_back(speaker_masks[idx]);
  }
  while (int(out.masks.size()) < channels) {
    out.masks.push_back(Mask::zeros(frames, bins));
  }
  return out;
}

ChannelAssignment stitch(const std::vector<Mask>& prev_masks,
                         const std::vector<Mask>& cur_masks, int overlap,
                         int skip_head, int skip_tail) {
  if (prev_masks.size() != cur_masks.size() || prev_masks.empty()) {
    throw std::invalid_argument("stitch: channel count mismatch");
  }
  const int channels = int(prev_masks.size());
  if (channels > kMaxStitchChannels) {
    throw std::invalid_argument("stitch: permutation search too large");
  }
  if (overlap < 1) {
    throw std::invalid_argument("stitch: overlap must be >= 1");
  }
  if (skip_head < 0 || skip_tail < 0) {
    throw std::invalid_argument("stitch: negative padding skip");
  }
  const Eigen::Index frames = prev_masks[0].frames();
  const Eigen::Index bins = prev_masks[0].bins();
  if (overlap > frames) {
    throw std::invalid_argument("stitch: overlap exceeds block length");
  }
  for (const auto& m : prev_masks) {
    if (m.frames() != frames || m.bins() != bins) {
      throw std::invalid_argument("stitch: mask shape mismatch");
    }
  }
  for (const auto& m : cur_masks) {
    if (m.frames() != frames || m.bins() != bins) {
      throw std::invalid_argument("stitch: mask shape mismatch");
    }
  }

  ChannelAssignment out;
  out.perm.resize(std::size_t(channels));
  std::iota(out.perm.begin(), out.perm.end(), 0);

  const Eigen::Index rows = overlap - skip_head - skip_tail;
  if (rows <= 0) {  // shared region is all padding; keep channels in place
    return out;
  }

  RealMatrix dist(channels, channels);
  for (int i = 0; i < channels; ++i) {
    auto prev_block =
        prev_masks[std::size_t(i)].data.middleRows(
            frames - overlap + skip_head, rows);
    for (int j = 0; j < channels; ++j) {
      auto cur_block =
          cur_masks[std::size_t(j)].data.middleRows(skip_head, rows);
      dist(i, j) = (prev_block - cur_block).square().sum();
    }
  }

  std::vector<int> perm(out.perm);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int c = 0; c < channels; ++c) total += dist(c, perm[std::size_t(c)]);
    if (total < best) {
      best = total;
      out.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  out.distance = best;
  return out;
}

ResidualMask dependency_residual(const std::vector<Mask>& prev_speaker_masks,
                                 int block_frames, int overlap,
                                 Eigen::Index bins) {
  if (overlap < 0 || overlap > block_frames) {
    throw std::invalid_argument("dependency_residual: bad overlap");
  }
  ResidualMask residual = Mask::ones(block_frames, bins);
  if (prev_speaker_masks.size() < 2 || overlap == 0) {
    // One extraction (or none) leaves nothing to carry over.
    return residual;
  }
  RealMatrix later_sum =
      RealMatrix::Zero(block_frames, bins);
  for (std::size_t i = 1; i < prev_speaker_masks.size(); ++i) {
    const auto& m = prev_speaker_masks[i];
    if (m.frames() != block_frames || m.bins() != bins) {
      throw std::invalid_argument("dependency_residual: mask shape mismatch");
    }
    later_sum += m.data;
  }
  const RealMatrix depleted =
      (1.0 - later_sum).cwiseMax(0.0).cwiseMin(1.0);
  residual.data.topRows(overlap) = depleted.bottomRows(overlap);
  return residual;
}

RsanBackend::RsanBackend(std::unique_ptr<MaskEstimator> estimator,
                         StopPolicy stop, SubtractionPolicy subtraction)
    : estimator_(std::move(estimator)),
      stop_(std::move(stop)),
      subtraction_(subtraction) {
  if (!estimator_) {
    throw std::invalid_argument("RsanBackend: null estimator");
  }
  stop_.validate();
}

BlockSeparation RsanBackend::separate(const MagnitudeSpectrogram& mixture,
                                      const ResidualMask& initial_residual,
                                      const OracleContext* context) {
  if (context != nullptr) {
    estimator_->reset_block(*context);
  } else {
    estimator_->reset_block(
        empty_context(mixture.data.rows(), mixture.data.cols()));
  }
  SeparateOptions options;
  options.subtraction = subtraction_;
  BlockResult result =
      separate_block(mixture, initial_residual, *estimator_, stop_, options);
  return BlockSeparation{std::move(result.speaker_masks),
                         std::move(result.noise_mask),
                         std::move(result.flags), 0, true};
}

std::unique_ptr<SeparatorBackend> RsanBackend::clone() const {
  return std::unique_ptr<SeparatorBackend>(
      new RsanBackend(estimator_->clone(), stop_, subtraction_));
}

UpitBackend::UpitBackend(OracleUpitEstimator estimator)
    : estimator_(std::move(estimator)) {}

BlockSeparation UpitBackend::separate(const MagnitudeSpectrogram& mixture,
                                      const ResidualMask& /*unused*/,
                                      const OracleContext* context) {
  if (context == nullptr) {
    throw ConfigError("upit backend requires ground-truth block context");
  }
  estimator_.reset_block(*context);
  UpitBlockOutput out = estimator_.estimate_all(mixture);
  return BlockSeparation{std::move(out.speaker_masks),
                         std::move(out.noise_mask),
                         {},
                         out.overflow,
                         false};
}

std::unique_ptr<SeparatorBackend> UpitBackend::clone() const {
  return std::make_unique<UpitBackend>(estimator_);
}

void CssConfig::validate() const {
  stft.validate();
  window.validate();
  if (workers < 1) {
    throw ConfigError("workers must be >= 1");
  }
  if (window.dependency && workers > 1) {
    throw ConfigError(
        "dependency carry-over makes blocks order-dependent; workers must "
        "be 1");
  }
}

CssPlan plan_css(std::span<const double> session, const CssConfig& cfg) {
  cfg.validate();
  CssPlan plan;
  plan.mixture_spec = stft(session, cfg.stft);
  plan.mixture_mag = magnitude(plan.mixture_spec);
  plan.blocks = segment(plan.mixture_spec.frames(), cfg.window);
  plan.session_len = session.size();
  return plan;
}

BlockSeparation separate_one(const CssPlan& plan, int block_index,
                             SeparatorBackend& backend,
                             const ResidualMask& initial_residual,
                             const ContextProvider& context,
                             const CssConfig& cfg) {
  const BlockRange& block = plan.blocks.at(std::size_t(block_index));
  MagnitudeSpectrogram mixture = block_magnitude(plan.mixture_mag, block,
                                                 cfg.window);
  if (context) {
    OracleContext ctx = context(block);
    return backend.separate(mixture, initial_residual, &ctx);
  }
  return backend.separate(mixture, initial_residual, nullptr);
}

CssOutput assemble_css(const CssPlan& plan,
                       const std::vector<BlockSeparation>& separations,
                       const CssConfig& cfg) {
  if (separations.size() != plan.blocks.size()) {
    throw std::invalid_argument("assemble_css: one separation per block");
  }
  const int channels = cfg.window.channels;
  const Eigen::Index t_blk = cfg.window.block_frames();
  const Eigen::Index overlap = cfg.window.overlap_frames();
  const Eigen::Index total = plan.mixture_mag.data.rows();
  const Eigen::Index bins = plan.mixture_mag.data.cols();

  CssOutput out;
  std::vector<RealMatrix> canvas(
      std::size_t(channels), RealMatrix::Zero(total, bins));
  std::vector<Mask> prev_aligned;

  for (std::size_t k = 0; k < separations.size(); ++k) {
    const BlockRange& block = plan.blocks[k];
    const BlockSeparation& sep = separations[k];
    PaddedMasks padded =
        zero_pad_channels(sep.speaker_masks, channels, t_blk, bins);

    ChannelAssignment assignment;
    if (k == 0) {
      assignment.perm.resize(std::size_t(channels));
      std::iota(assignment.perm.begin(), assignment.perm.end(), 0);
    } else {
      const int skip_head = int(std::max<Eigen::Index>(0, -block.start));
      const int skip_tail = int(std::max<Eigen::Index>(
          0, std::min(overlap, block.start + overlap - total)));
      assignment = stitch(prev_aligned, padded.masks, int(overlap), skip_head,
                          skip_tail);
    }

    std::vector<Mask> aligned;
    aligned.reserve(std::size_t(channels));
    for (int c = 0; c < channels; ++c) {
      aligned.push_back(padded.masks[std::size_t(assignment.perm[c])]);
    }

    const Eigen::Index rows = block.current_end - block.current_begin;
    const Eigen::Index local = block.current_begin - block.start;
    for (int c = 0; c < channels; ++c) {
      canvas[std::size_t(c)].middleRows(block.current_begin, rows) =
          aligned[std::size_t(c)].data.middleRows(local, rows);
    }

    BlockLogEntry entry;
    entry.block = block.index;
    entry.frame_begin = block.current_begin;
    entry.frame_end = block.current_end;
    entry.iterations = sep.counted ? int(sep.speaker_masks.size()) : -1;
    entry.flags = sep.flags;
    entry.assignment = assignment.perm;
    entry.stitch_distance = assignment.distance;
    entry.overflow = sep.overflow + padded.dropped;
    out.overflow_total += entry.overflow;
    out.blocks.push_back(std::move(entry));

    prev_aligned = std::move(aligned);
  }

  out.channels.reserve(std::size_t(channels));
  out.global_masks.reserve(std::size_t(channels));
  for (int c = 0; c < channels; ++c) {
    Mask mask = Mask::clamped(std::move(canvas[std::size_t(c)]));
    std::vector<double> wave = istft(apply_mask(mask, plan.mixture_spec));
    wave.resize(plan.session_len, 0.0);
    out.channels.push_back(std::move(wave));
    out.global_masks.push_back(std::move(mask));
  }
  return out;
}

CssOutput run_css(std::span<const double> session, SeparatorBackend& backend,
                  const CssConfig& cfg, const ContextProvider& context) {
  cfg.validate();
  if (cfg.window.dependency && !backend.counts_speakers()) {
    throw ConfigError(
        "dependency carry-over needs a recursive backend with per-iteration "
        "masks");
  }
  CssPlan plan = plan_css(session, cfg);
  const Eigen::Index t_blk = cfg.window.block_frames();
  const Eigen::Index overlap = cfg.window.overlap_frames();
  const Eigen::Index bins = plan.mixture_mag.data.cols();
  const ResidualMask all_one = Mask::ones(t_blk, bins);

  std::vector<BlockSeparation> separations(plan.blocks.size());
  if (cfg.window.dependency) {
    for (std::size_t k = 0; k < plan.blocks.size(); ++k) {
      ResidualMask initial =
          k == 0 ? all_one
                 : dependency_residual(separations[k - 1].speaker_masks,
                                       int(t_blk), int(overlap), bins);
      separations[k] =
          separate_one(plan, int(k), backend, initial, context, cfg);
    }
  } else if (cfg.workers == 1 || plan.blocks.size() < 2) {
    for (std::size_t k = 0; k < plan.blocks.size(); ++k) {
      separations[k] =
          separate_one(plan, int(k), backend, all_one, context, cfg);
    }
  } else {
    const std::size_t workers =
        std::min<std::size_t>(std::size_t(cfg.workers), plan.blocks.size());
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          auto local = backend.clone();
          for (std::size_t k = w; k < plan.blocks.size(); k += workers) {
            separations[k] =
                separate_one(plan, int(k), *local, all_one, context, cfg);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  return assemble_css(plan, separations, cfg);
}

}  // namespace rcss
