// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rcss/runner.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>

#include "rcss/log.hpp"
#include "rcss/wav.hpp"

namespace rcss {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write '" + path + "'");
  }
  out << text;
}

json intervals_to_json(const std::vector<Interval>& intervals) {
  json out = json::array();
  for (const auto& iv : intervals) {
    out.push_back({{"begin", iv.begin}, {"end", iv.end}});
  }
  return out;
}

std::vector<Interval> intervals_from_json(const json& j) {
  std::vector<Interval> out;
  for (const auto& iv : j) {
    out.push_back(Interval{iv.at("begin").get<Eigen::Index>(),
                           iv.at("end").get<Eigen::Index>()});
  }
  return out;
}

std::string sanitize(const std::string& text) {
  std::string out;
  for (char c : text) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
            c == '-' || c == '=')
               ? c
               : '_';
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("missing artifact '" + path +
                      "' (run the earlier stage first)");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("artifact '" + path + "' is not valid JSON: " +
                      e.what());
  }
}

std::vector<BlockLogEntry> load_block_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("missing artifact '" + path + "' (run separate first)");
  }
  std::vector<BlockLogEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    BlockLogEntry entry;
    entry.block = j.at("block").get<int>();
    entry.frame_begin = j.at("frames").at(0).get<Eigen::Index>();
    entry.frame_end = j.at("frames").at(1).get<Eigen::Index>();
    entry.iterations = j.at("iterations").get<int>();
    entry.flags = j.at("flags").get<std::vector<double>>();
    entry.assignment = j.at("assignment").get<std::vector<int>>();
    entry.stitch_distance = j.at("stitch_distance").get<double>();
    entry.overflow = j.at("overflow").get<int>();
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

std::string session_dir(const RunConfig& cfg, const SessionSpec& spec) {
  return cfg.output_dir + "/sessions/" + sanitize(spec.name);
}

std::string separated_dir(const RunConfig& cfg, const SessionSpec& spec) {
  return cfg.output_dir + "/separated/" + sanitize(spec.name);
}

void write_session(const std::string& dir, const SessionTruth& truth,
                   const SessionSpec& spec, const std::string& condition) {
  fs::create_directories(dir);
  write_wav(dir + "/mixture.wav", truth.mixture, truth.sample_rate);
  write_wav(dir + "/noise.wav", truth.noise, truth.sample_rate);
  for (std::size_t s = 0; s < truth.refs.size(); ++s) {
    write_wav(dir + "/ref_" + std::to_string(s) + ".wav", truth.refs[s],
              truth.sample_rate);
  }
  json j;
  j["name"] = spec.name;
  j["condition"] = condition;
  j["sample_rate"] = truth.sample_rate;
  j["num_speakers"] = int(truth.refs.size());
  j["seed"] = spec.seed;
  j["requested_overlap"] = spec.overlap_ratio;
  j["realized_overlap"] = truth.realized_overlap;
  j["hot_spots"] = intervals_to_json(truth.hot_spots);
  json activity = json::array();
  for (const auto& speaker : truth.activity) {
    activity.push_back(intervals_to_json(speaker));
  }
  j["activity"] = activity;
  write_text(dir + "/truth.json", j.dump(2) + "\n");
}

LoadedSession load_session(const std::string& dir, int expected_rate) {
  const json j = read_json_file(dir + "/truth.json");
  LoadedSession loaded;
  loaded.condition = j.at("condition").get<std::string>();
  SessionTruth& truth = loaded.truth;
  truth.sample_rate = j.at("sample_rate").get<int>();
  truth.realized_overlap = j.at("realized_overlap").get<double>();
  truth.hot_spots = intervals_from_json(j.at("hot_spots"));
  for (const auto& speaker : j.at("activity")) {
    truth.activity.push_back(intervals_from_json(speaker));
  }
  truth.mixture = read_wav(dir + "/mixture.wav", expected_rate).samples;
  truth.noise = read_wav(dir + "/noise.wav", expected_rate).samples;
  const int speakers = j.at("num_speakers").get<int>();
  for (int s = 0; s < speakers; ++s) {
    truth.refs.push_back(
        read_wav(dir + "/ref_" + std::to_string(s) + ".wav", expected_rate)
            .samples);
  }
  return loaded;
}

std::unique_ptr<SeparatorBackend> make_backend(const RunConfig& cfg) {
  const auto& e = cfg.estimator;
  if (e.name == "oracle" || e.name == "leaky_oracle") {
    const double leak = e.name == "oracle" ? 0.0 : e.leak;
    return std::make_unique<RsanBackend>(
        std::make_unique<OracleRsanEstimator>(e.activity_threshold, leak),
        cfg.stop);
  }
  if (e.name == "toy") {
    return std::make_unique<RsanBackend>(
        std::make_unique<ToyEstimator>(cfg.stft.bins(), e.toy_seed),
        cfg.stop);
  }
  if (e.name == "upit") {
    return std::make_unique<UpitBackend>(
        OracleUpitEstimator(cfg.channels, e.activity_threshold));
  }
  throw ConfigError("estimator.name '" + e.name + "' unknown");
}

void cmd_generate(const RunConfig& cfg) {
  if (cfg.sessions.empty()) {
    throw ConfigError("no sessions configured");
  }
  for (std::size_t i = 0; i < cfg.sessions.size(); ++i) {
    const SessionSpec& spec = cfg.sessions[i];
    SessionTruth truth = mix_session(spec);
    write_session(session_dir(cfg, spec), truth, spec, cfg.conditions[i]);
    RCSS_INFO << "generated " << session_dir(cfg, spec) << " ("
              << truth.mixture.size() << " samples)";
  }
}

void cmd_separate(const RunConfig& cfg) {
  if (cfg.sessions.empty()) {
    throw ConfigError("no sessions configured");
  }
  const CssConfig css_cfg = cfg.css();
  for (const SessionSpec& spec : cfg.sessions) {
    const LoadedSession loaded =
        load_session(session_dir(cfg, spec), cfg.stft.sample_rate);
    const SessionSpectra spectra = analyze_session(loaded.truth, cfg.stft);
    const ContextProvider provider = make_truth_context_provider(
        spectra, css_cfg.window, cfg.estimator.activity_threshold);
    auto backend = make_backend(cfg);
    const CssOutput out =
        run_css(loaded.truth.mixture, *backend, css_cfg, provider);

    const std::string dir = separated_dir(cfg, spec);
    fs::create_directories(dir);
    for (std::size_t c = 0; c < out.channels.size(); ++c) {
      write_wav(dir + "/channel_" + std::to_string(c) + ".wav",
                out.channels[c], cfg.stft.sample_rate);
    }
    std::string log_lines;
    for (const auto& entry : out.blocks) {
      json j;
      j["block"] = entry.block;
      j["frames"] = {entry.frame_begin, entry.frame_end};
      j["iterations"] = entry.iterations;
      j["flags"] = entry.flags;
      j["assignment"] = entry.assignment;
      j["stitch_distance"] = entry.stitch_distance;
      j["overflow"] = entry.overflow;
      log_lines += j.dump() + "\n";
    }
    write_text(dir + "/blocks.jsonl", log_lines);

    json run;
    run["estimator"] = cfg.estimator.name;
    run["thresholds"] = cfg.stop.thresholds;
    run["max_iterations"] = cfg.stop.max_iterations;
    run["dependency"] = cfg.dependency;
    run["channels"] = cfg.channels;
    run["workers"] = cfg.workers;
    run["window_frames"] = {css_cfg.window.n_p, css_cfg.window.n_c,
                            css_cfg.window.n_f};
    run["overflow_total"] = out.overflow_total;
    write_text(dir + "/run.json", run.dump(2) + "\n");
    RCSS_INFO << "separated " << spec.name << ": " << out.blocks.size()
              << " blocks, overflow " << out.overflow_total;
  }
}

EvalReport evaluate_sessions(const RunConfig& cfg) {
  if (cfg.sessions.empty()) {
    throw ConfigError("no sessions configured");
  }
  const CssConfig css_cfg = cfg.css();
  EvalReport report;
  for (std::size_t i = 0; i < cfg.sessions.size(); ++i) {
    const SessionSpec& spec = cfg.sessions[i];
    const LoadedSession loaded =
        load_session(session_dir(cfg, spec), cfg.stft.sample_rate);
    const std::string dir = separated_dir(cfg, spec);

    std::vector<std::vector<double>> channels;
    for (int c = 0; c < cfg.channels; ++c) {
      const std::string path = dir + "/channel_" + std::to_string(c) + ".wav";
      if (!fs::exists(path)) {
        throw ConfigError("missing artifact '" + path +
                          "' (run separate first)");
      }
      channels.push_back(read_wav(path, cfg.stft.sample_rate).samples);
    }
    const std::vector<BlockLogEntry> blocks =
        load_block_log(dir + "/blocks.jsonl");

    SessionEval row;
    row.session = spec.name;
    row.condition = loaded.condition;
    row.realized_overlap = loaded.truth.realized_overlap;
    const PitResult pit = pit_si_snr(channels, loaded.truth.refs);
    row.si_snr_db = pit.mean_db;
    row.si_snri_db = pit_si_snr_improvement(channels, loaded.truth.refs,
                                            loaded.truth.mixture);
    row.leakage =
        leakage_db(channels, loaded.truth.activity, pit.assignment);
    const SessionSpectra spectra = analyze_session(loaded.truth, cfg.stft);
    const std::vector<BlockRange> ranges =
        segment(spectra.mixture_mag.data.rows(), css_cfg.window);
    if (ranges.size() != blocks.size()) {
      throw ConfigError(
          "block log for '" + spec.name +
          "' does not match the window config; rerun separate");
    }
    row.counting = counting_accuracy(
        blocks, truth_block_counts(spectra, ranges, css_cfg.window,
                                   cfg.estimator.activity_threshold));
    for (const auto& entry : blocks) row.overflow += entry.overflow;
    report.sessions.push_back(std::move(row));
  }
  return report;
}

namespace {

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  double snri = 0.0;
  for (const auto& row : report.sessions) {
    json r;
    r["session"] = row.session;
    r["condition"] = row.condition;
    r["si_snr_db"] = format_fixed(row.si_snr_db);
    r["si_snri_db"] = format_fixed(row.si_snri_db);
    r["leakage_db"] = row.leakage ? json(format_fixed(*row.leakage)) : json();
    r["counting_accuracy"] =
        row.counting ? json(format_fixed(*row.counting)) : json();
    r["overflow"] = row.overflow;
    r["realized_overlap"] = format_fixed(row.realized_overlap);
    rows.push_back(std::move(r));
    snri += row.si_snri_db;
  }
  json out;
  out["sessions"] = std::move(rows);
  out["mean_si_snri_db"] = format_fixed(
      report.sessions.empty() ? 0.0 : snri / double(report.sessions.size()));
  return out;
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg, const std::string& compare_dir) {
  const EvalReport report = evaluate_sessions(cfg);
  write_text(cfg.output_dir + "/report.csv", report_csv(report));
  write_text(cfg.output_dir + "/report.json",
             report_to_json(report).dump(2) + "\n");
  RCSS_INFO << "evaluated " << report.sessions.size() << " session(s) -> "
            << cfg.output_dir << "/report.csv";

  if (!compare_dir.empty()) {
    const json other = read_json_file(compare_dir + "/report.json");
    std::string delta = "session,si_snri_db_here,si_snri_db_other,delta\n";
    for (const auto& row : report.sessions) {
      for (const auto& o : other.at("sessions")) {
        if (o.at("session").get<std::string>() != row.session) continue;
        const double theirs = std::stod(o.at("si_snri_db").get<std::string>());
        delta += row.session + ',' + format_fixed(row.si_snri_db) + ',' +
                 format_fixed(theirs) + ',' +
                 format_fixed(row.si_snri_db - theirs) + '\n';
      }
    }
    write_text(cfg.output_dir + "/delta.csv", delta);
  }
}

void cmd_sweep(const nlohmann::json& base_config, const std::string& parameter,
               const std::vector<std::string>& values) {
  if (values.empty()) {
    throw ConfigError("sweep needs at least one value");
  }
  const std::string pointer = resolve_knob(parameter);
  const std::string base_dir =
      parse_run_config(base_config).output_dir;

  std::string aggregate =
      "parameter,value,mean_si_snr_db,mean_si_snri_db,total_overflow\n";
  for (const std::string& value : values) {
    json j = base_config;
    apply_override(j, pointer + "=" + value);
    j["output_dir"] =
        base_dir + "/sweep/" + sanitize(parameter + "=" + value);
    const RunConfig cfg = parse_run_config(j);
    cmd_generate(cfg);
    cmd_separate(cfg);
    cmd_evaluate(cfg);
    const EvalReport report = evaluate_sessions(cfg);
    double snr = 0.0;
    double snri = 0.0;
    int overflow = 0;
    for (const auto& row : report.sessions) {
      snr += row.si_snr_db;
      snri += row.si_snri_db;
      overflow += row.overflow;
    }
    const double n = double(report.sessions.size());
    aggregate += parameter + ',' + value + ',' + format_fixed(snr / n) + ',' +
                 format_fixed(snri / n) + ',' + std::to_string(overflow) +
                 '\n';
  }
  fs::create_directories(base_dir);
  write_text(base_dir + "/sweep.csv", aggregate);
  RCSS_INFO << "sweep over " << parameter << " -> " << base_dir
            << "/sweep.csv";
}

}  // namespace rcss
