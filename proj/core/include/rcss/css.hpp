// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "rcss/estimators.hpp"
#include "rcss/rsan.hpp"
#include "rcss/spectral.hpp"

namespace rcss {

// Sliding-window geometry in STFT frames. A block spans
// n_p (past) + n_c (current) + n_f (future) frames and the window advances
// by n_c, so consecutive blocks share n_p + n_f frames. Only the current
// region of each block lands in the final output.
struct WindowConfig {
  int n_p = 75;
  int n_c = 50;
  int n_f = 25;
  int channels = 2;
  bool dependency = false;

  int block_frames() const { return n_p + n_c + n_f; }
  int overlap_frames() const { return n_p + n_f; }
  void validate() const;  // throws ConfigError
};

// Derives frame counts from block/hop durations: the shared region is split
// 3:1 between past and future, matching a 1.2/0.8/0.4 s split for a 2.4 s
// block with a 0.8 s hop.
WindowConfig window_from_seconds(double block_s, double hop_s,
                                 const StftConfig& stft, int channels,
                                 bool dependency);

// One window position. Global frame indices; start can be negative (the
// first blocks read zeros before the session) and the last block may reach
// past the end. current_* is the half-open global range this block owns.
struct BlockRange {
  int index = 0;
  Eigen::Index start = 0;
  Eigen::Index pad_left = 0;
  Eigen::Index pad_right = 0;
  Eigen::Index current_begin = 0;
  Eigen::Index current_end = 0;
};

// Window positions covering total_frames; every frame belongs to exactly
// one block's current region.
std::vector<BlockRange> segment(Eigen::Index total_frames,
                                const WindowConfig& cfg);

// Copies the block's rows out of the full-session spectrogram, zero rows
// where the block extends beyond the session.
MagnitudeSpectrogram block_magnitude(const MagnitudeSpectrogram& session,
                                     const BlockRange& block,
                                     const WindowConfig& cfg);

// Exactly `channels` masks: zero masks appended, or the weakest masks
// dropped (by total squared value) with the drop count reported.
struct PaddedMasks {
  std::vector<Mask> masks;
  int dropped = 0;
};
PaddedMasks zero_pad_channels(const std::vector<Mask>& speaker_masks,
                              int channels, Eigen::Index frames,
                              Eigen::Index bins);

// Channel alignment between consecutive blocks: global channel c continues
// as local mask perm[c] of the current block.
struct ChannelAssignment {
  std::vector<int> perm;
  double distance = 0.0;  // shared-region squared distance of the winner
};

// Minimizes the total squared mask distance between the previous block's
// last `overlap` rows and the current block's first `overlap` rows over all
// channel permutations (exhaustive; channels <= 4). skip_head/skip_tail
// drop shared rows that are window padding rather than session content.
ChannelAssignment stitch(const std::vector<Mask>& prev_masks,
                         const std::vector<Mask>& cur_masks, int overlap,
                         int skip_head = 0, int skip_tail = 0);

// Initial residual for a block given the previous block's speaker masks in
// extraction order: rows that overlap the previous block start from
// clamp(1 - sum of its 2nd-and-later masks, 0, 1) (tail rows of the
// previous block), everything after the overlap starts from 1.
ResidualMask dependency_residual(const std::vector<Mask>& prev_speaker_masks,
                                 int block_frames, int overlap,
                                 Eigen::Index bins);

// One block's local separation before alignment.
struct BlockSeparation {
  std::vector<Mask> speaker_masks;
  Mask noise_mask;
  std::vector<double> flags;
  int overflow = 0;    // sources dropped inside the backend
  bool counted = true; // false when the backend has no speaker counting
};

// Adapts an estimator family to the block pipeline. The context pointer is
// null when the run has no ground truth to offer (trainable estimators).
class SeparatorBackend {
 public:
  virtual ~SeparatorBackend() = default;
  virtual BlockSeparation separate(const MagnitudeSpectrogram& mixture,
                                   const ResidualMask& initial_residual,
                                   const OracleContext* context) = 0;
  virtual std::unique_ptr<SeparatorBackend> clone() const = 0;
  virtual bool counts_speakers() const = 0;
};

class RsanBackend : public SeparatorBackend {
 public:
  RsanBackend(std::unique_ptr<MaskEstimator> estimator, StopPolicy stop,
              SubtractionPolicy subtraction =
                  SubtractionPolicy::kSpeakerAndNoise);
  BlockSeparation separate(const MagnitudeSpectrogram& mixture,
                           const ResidualMask& initial_residual,
                           const OracleContext* context) override;
  std::unique_ptr<SeparatorBackend> clone() const override;
  bool counts_speakers() const override { return true; }

  MaskEstimator& estimator() { return *estimator_; }

 private:
  std::unique_ptr<MaskEstimator> estimator_;
  StopPolicy stop_;
  SubtractionPolicy subtraction_;
};

// Fixed-channel baseline; requires ground-truth context and ignores the
// residual (no recursion to feed it into).
class UpitBackend : public SeparatorBackend {
 public:
  explicit UpitBackend(OracleUpitEstimator estimator);
  BlockSeparation separate(const MagnitudeSpectrogram& mixture,
                           const ResidualMask& initial_residual,
                           const OracleContext* context) override;
  std::unique_ptr<SeparatorBackend> clone() const override;
  bool counts_speakers() const override { return false; }

 private:
  OracleUpitEstimator estimator_;
};

struct CssConfig {
  StftConfig stft;
  WindowConfig window;
  int workers = 1;

  void validate() const;  // throws ConfigError
};

// Supplies per-block ground truth; may be empty for estimators that need
// none.
using ContextProvider = std::function<OracleContext(const BlockRange&)>;

struct BlockLogEntry {
  int block = 0;
  Eigen::Index frame_begin = 0;  // current-region global frames
  Eigen::Index frame_end = 0;
  int iterations = 0;  // -1 when the backend has no counting
  std::vector<double> flags;
  std::vector<int> assignment;
  double stitch_distance = 0.0;
  int overflow = 0;
};

struct CssOutput {
  std::vector<std::vector<double>> channels;  // one waveform per channel
  std::vector<Mask> global_masks;             // stitched canvases, T x F
  std::vector<BlockLogEntry> blocks;
  int overflow_total = 0;
};

// Precomputed session-level state shared by all blocks.
struct CssPlan {
  ComplexSpectrogram mixture_spec;
  MagnitudeSpectrogram mixture_mag;
  std::vector<BlockRange> blocks;
  size_t session_len = 0;
};

CssPlan plan_css(std::span<const double> session, const CssConfig& cfg);

// Runs the backend on one block. Pulls the block's context from the
// provider when one is set.
BlockSeparation separate_one(const CssPlan& plan, int block_index,
                             SeparatorBackend& backend,
                             const ResidualMask& initial_residual,
                             const ContextProvider& context,
                             const CssConfig& cfg);

// Stitches per-block results (in block order) into global masks and
// synthesizes the output channels.
CssOutput assemble_css(const CssPlan& plan,
                       const std::vector<BlockSeparation>& separations,
                       const CssConfig& cfg);

// Full pipeline: segment, separate every block (sequentially when the
// dependency carry-over is on, optionally in parallel otherwise), stitch,
// and synthesize.
CssOutput run_css(std::span<const double> session, SeparatorBackend& backend,
                  const CssConfig& cfg, const ContextProvider& context = {});

}  // namespace rcss
