#pragma once

// Platoon extraction from NGSIM-style trajectory tables, sliding-window
// sampling, train/test splitting and on-disk window datasets.
//
// Units are feet, feet per second and 10 Hz frames everywhere.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossfusor/array_io.hpp"
#include "crossfusor/errors.hpp"
#include "crossfusor/random.hpp"

namespace crossfusor::data {

inline constexpr double kFrameRateHz = 10.0;
inline constexpr int kHistoryFrames = 30;
inline constexpr int kFutureFrames = 50;
inline constexpr int kDefaultPlatoonFrames = 200;
inline constexpr int kDefaultStride = 10;

struct TrajectoryRecord {
  int vehicle_id = 0;
  int frame_id = 0;
  double position = 0.0;  // ft
  double speed = 0.0;     // ft/s
  int lane_id = 0;
  int preceding_id = 0;  // 0 = none
  int following_id = 0;  // 0 = none
};

struct VehicleTrack {
  int vehicle_id = 0;
  std::vector<double> position;
  std::vector<double> speed;
};

/// Leader / study / follower sharing one lane over `length()` consecutive frames.
struct Platoon {
  int platoon_id = 0;
  int lane_id = 0;
  int start_frame = 0;
  VehicleTrack leader;
  VehicleTrack study;
  VehicleTrack follower;

  std::size_t length() const { return study.position.size(); }
};

struct WindowMeta {
  int platoon_id = 0;
  int leader_id = 0;
  int study_id = 0;
  int follower_id = 0;
  int start_frame = 0;
};

/// One sample: H history frames of all three vehicles and F future frames of the study vehicle.
/// Leader/follower futures ride along for plotting only; the model never reads them.
struct PlatoonWindow {
  std::vector<double> x_lea_his, x_stu_his, x_fol_his;
  std::vector<double> v_lea_his, v_stu_his, v_fol_his;
  std::vector<double> dx1_his, dx2_his;
  std::vector<double> x_stu_fut;
  std::vector<double> x_lea_fut, x_fol_fut;
  WindowMeta meta;

  int history() const { return static_cast<int>(x_stu_his.size()); }
  int future() const { return static_cast<int>(x_stu_fut.size()); }
};

struct WindowShape {
  int history = kHistoryFrames;
  int future = kFutureFrames;
  int span() const { return history + future; }
};

// ---------------------------------------------------------------------------
// Ingestion

/// Maps logical fields to table columns. With a header row the entries are
/// column names; without one they are zero-based column indices.
struct ColumnMap {
  std::string vehicle_id = "Vehicle_ID";
  std::string frame_id = "Frame_ID";
  std::string position = "Local_Y";
  std::string speed = "v_Vel";
  std::string lane = "Lane_ID";
  std::string preceding = "Preceding";
  std::string following = "Following";
};

struct IngestConfig {
  ColumnMap columns;
  char delimiter = ',';
  bool whitespace_delimited = false;  // raw NGSIM .txt exports
  bool has_header = true;
  int platoon_length = kDefaultPlatoonFrames;
};

struct IngestReport {
  std::vector<Platoon> platoons;
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;
  std::vector<std::string> rejections;  // first few reasons, for diagnostics

  std::size_t trajectory_count() const { return platoons.size() * 3; }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, const IngestConfig& cfg) {
  std::vector<std::string> cells;
  if (cfg.whitespace_delimited) {
    std::istringstream s(line);
    std::string cell;
    while (s >> cell) cells.push_back(cell);
    return cells;
  }
  std::string cell;
  for (char ch : line) {
    if (ch == cfg.delimiter) {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t\"");
    const auto e = c.find_last_not_of(" \t\"");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  if constexpr (std::is_integral_v<T>) {
    // NGSIM sometimes writes integer ids as "12.0".
    double d = 0.0;
    if (!parse_number(s, d) || d != std::floor(d) || std::abs(d) > 2e9) return false;
    out = static_cast<T>(d);
    return true;
  } else {
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
  }
}

struct ColumnIndices {
  std::size_t vehicle, frame, position, speed, lane, preceding, following;
  std::size_t max() const { return std::max({vehicle, frame, position, speed, lane, preceding, following}); }
};

inline ColumnIndices resolve_columns(const std::vector<std::string>& header, const IngestConfig& cfg) {
  auto find = [&](const std::string& name) -> std::size_t {
    if (!cfg.has_header) {
      std::size_t idx = 0;
      require(parse_number(name, idx), ErrorKind::config, "column index expected without header, got '" + name + "'");
      return idx;
    }
    auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorKind::data, "missing column '" + name + "' in table header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const ColumnMap& c = cfg.columns;
  return {find(c.vehicle_id), find(c.frame_id), find(c.position), find(c.speed),
          find(c.lane),       find(c.preceding), find(c.following)};
}

inline std::uint64_t record_key(int vehicle, int frame) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(vehicle)) << 32) |
         static_cast<std::uint32_t>(frame);
}

}  // namespace detail

/// Parses a character-separated trajectory table. Malformed rows are rejected
/// and counted in `report`, never fatal.
inline std::vector<TrajectoryRecord> parse_records(std::istream& in, const IngestConfig& cfg, IngestReport& report) {
  std::vector<TrajectoryRecord> records;
  std::string line;
  detail::ColumnIndices idx{};
  bool have_columns = false;
  std::set<std::uint64_t> seen;
  std::size_t line_no = 0;

  auto reject = [&](const std::string& why) {
    ++report.rows_rejected;
    if (report.rejections.size() < 20) report.rejections.push_back("line " + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_line(line, cfg);
    if (!have_columns) {
      idx = detail::resolve_columns(cells, cfg);
      have_columns = true;
      if (cfg.has_header) continue;
    }
    ++report.rows_read;
    if (cells.size() <= idx.max()) {
      reject("too few columns");
      continue;
    }
    TrajectoryRecord r;
    if (!detail::parse_number(cells[idx.vehicle], r.vehicle_id) || !detail::parse_number(cells[idx.frame], r.frame_id) ||
        !detail::parse_number(cells[idx.position], r.position) || !detail::parse_number(cells[idx.speed], r.speed) ||
        !detail::parse_number(cells[idx.lane], r.lane_id) ||
        !detail::parse_number(cells[idx.preceding], r.preceding_id) ||
        !detail::parse_number(cells[idx.following], r.following_id)) {
      reject("unparseable field");
      continue;
    }
    if (r.speed < 0.0) {
      reject("negative speed");
      continue;
    }
    if (!seen.insert(detail::record_key(r.vehicle_id, r.frame_id)).second) {
      reject("duplicate (vehicle, frame)");
      continue;
    }
    records.push_back(r);
  }
  return records;
}

/// Finds leader-study-follower triples that keep the same partners and lane on
/// consecutive frames for `platoon_length` frames. Runs longer than one platoon
/// are cut into non-overlapping platoons.
inline std::vector<Platoon> extract_platoons(const std::vector<TrajectoryRecord>& records, int platoon_length) {
  require(platoon_length >= 1, ErrorKind::invalid_argument, "platoon length must be positive");
  std::unordered_map<std::uint64_t, const TrajectoryRecord*> by_key;
  std::map<int, std::vector<const TrajectoryRecord*>> by_vehicle;
  for (const auto& r : records) {
    by_key.emplace(detail::record_key(r.vehicle_id, r.frame_id), &r);
    by_vehicle[r.vehicle_id].push_back(&r);
  }

  std::vector<Platoon> platoons;
  for (auto& [vid, track] : by_vehicle) {
    std::sort(track.begin(), track.end(),
              [](const TrajectoryRecord* a, const TrajectoryRecord* b) { return a->frame_id < b->frame_id; });

    std::vector<const TrajectoryRecord*> run_s, run_l, run_f;
    auto flush = [&]() {
      run_s.clear();
      run_l.clear();
      run_f.clear();
    };

    for (const TrajectoryRecord* s : track) {
      const TrajectoryRecord* l = nullptr;
      const TrajectoryRecord* f = nullptr;
      if (s->preceding_id > 0 && s->following_id > 0) {
        auto il = by_key.find(detail::record_key(s->preceding_id, s->frame_id));
        auto iff = by_key.find(detail::record_key(s->following_id, s->frame_id));
        if (il != by_key.end()) l = il->second;
        if (iff != by_key.end()) f = iff->second;
      }
      const bool valid = l && f && l->lane_id == s->lane_id && f->lane_id == s->lane_id &&
                         l->position > s->position && s->position > f->position;
      const bool continues = !run_s.empty() && valid && s->frame_id == run_s.back()->frame_id + 1 &&
                             s->lane_id == run_s.back()->lane_id && l->vehicle_id == run_l.back()->vehicle_id &&
                             f->vehicle_id == run_f.back()->vehicle_id;
      if (!continues) flush();
      if (!valid) continue;
      run_s.push_back(s);
      run_l.push_back(l);
      run_f.push_back(f);
      if (static_cast<int>(run_s.size()) == platoon_length) {
        Platoon p;
        p.platoon_id = static_cast<int>(platoons.size());
        p.lane_id = s->lane_id;
        p.start_frame = run_s.front()->frame_id;
        p.leader.vehicle_id = l->vehicle_id;
        p.study.vehicle_id = vid;
        p.follower.vehicle_id = f->vehicle_id;
        for (int i = 0; i < platoon_length; ++i) {
          const auto k = static_cast<std::size_t>(i);
          p.leader.position.push_back(run_l[k]->position);
          p.leader.speed.push_back(run_l[k]->speed);
          p.study.position.push_back(run_s[k]->position);
          p.study.speed.push_back(run_s[k]->speed);
          p.follower.position.push_back(run_f[k]->position);
          p.follower.speed.push_back(run_f[k]->speed);
        }
        platoons.push_back(std::move(p));
        flush();
      }
    }
  }
  return platoons;
}

/// Full ingestion. Throws ErrorKind::data when no platoon survives.
inline IngestReport ingest_ngsim(std::istream& in, const IngestConfig& cfg) {
  IngestReport report;
  const auto records = parse_records(in, cfg, report);
  report.platoons = extract_platoons(records, cfg.platoon_length);
  require(!report.platoons.empty(), ErrorKind::data,
          "no " + std::to_string(cfg.platoon_length) + "-frame platoons found (" + std::to_string(report.rows_read) +
              " rows read, " + std::to_string(report.rows_rejected) + " rejected)");
  return report;
}

// ---------------------------------------------------------------------------
// Windowing

inline std::size_t window_count(std::size_t platoon_frames, int stride, WindowShape shape = {}) {
  const auto span = static_cast<std::size_t>(shape.span());
  if (platoon_frames < span || stride < 1) return 0;
  return (platoon_frames - span) / static_cast<std::size_t>(stride) + 1;
}

struct WindowingResult {
  std::vector<PlatoonWindow> windows;
  std::vector<std::string> warnings;
};

inline WindowingResult window_platoons(const std::vector<Platoon>& platoons, int stride, WindowShape shape = {}) {
  require(stride >= 1, ErrorKind::invalid_argument, "stride must be >= 1");
  WindowingResult result;
  const auto h = static_cast<std::size_t>(shape.history);
  const auto f = static_cast<std::size_t>(shape.future);
  for (const Platoon& p : platoons) {
    if (p.length() < h + f) {
      result.warnings.push_back("platoon " + std::to_string(p.platoon_id) + " shorter than " +
                                std::to_string(h + f) + " frames; skipped");
      continue;
    }
    const std::size_t n = window_count(p.length(), stride, shape);
    for (std::size_t w = 0; w < n; ++w) {
      const std::size_t s = w * static_cast<std::size_t>(stride);
      auto slice = [&](const std::vector<double>& v, std::size_t from, std::size_t len) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(from),
                                   v.begin() + static_cast<std::ptrdiff_t>(from + len));
      };
      PlatoonWindow win;
      win.x_lea_his = slice(p.leader.position, s, h);
      win.x_stu_his = slice(p.study.position, s, h);
      win.x_fol_his = slice(p.follower.position, s, h);
      win.v_lea_his = slice(p.leader.speed, s, h);
      win.v_stu_his = slice(p.study.speed, s, h);
      win.v_fol_his = slice(p.follower.speed, s, h);
      win.x_stu_fut = slice(p.study.position, s + h, f);
      win.x_lea_fut = slice(p.leader.position, s + h, f);
      win.x_fol_fut = slice(p.follower.position, s + h, f);
      win.dx1_his.resize(h);
      win.dx2_his.resize(h);
      bool gaps_ok = true;
      for (std::size_t t = 0; t < h; ++t) {
        win.dx1_his[t] = win.x_lea_his[t] - win.x_stu_his[t];
        win.dx2_his[t] = win.x_stu_his[t] - win.x_fol_his[t];
        gaps_ok = gaps_ok && win.dx1_his[t] > 0.0 && win.dx2_his[t] > 0.0;
      }
      if (!gaps_ok) {
        result.warnings.push_back("platoon " + std::to_string(p.platoon_id) + " window at frame " +
                                  std::to_string(p.start_frame + static_cast<int>(s)) + " has a non-positive gap; skipped");
        continue;
      }
      win.meta = {p.platoon_id, p.leader.vehicle_id, p.study.vehicle_id, p.follower.vehicle_id,
                  p.start_frame + static_cast<int>(s)};
      result.windows.push_back(std::move(win));
    }
  }
  return result;
}

/// Checks the length and gap-positivity invariants of a window.
inline bool window_is_valid(const PlatoonWindow& w, WindowShape shape = {}) {
  const auto h = static_cast<std::size_t>(shape.history);
  const auto f = static_cast<std::size_t>(shape.future);
  const std::vector<const std::vector<double>*> hist = {&w.x_lea_his, &w.x_stu_his, &w.x_fol_his, &w.v_lea_his,
                                                        &w.v_stu_his, &w.v_fol_his, &w.dx1_his,   &w.dx2_his};
  for (const auto* v : hist) {
    if (v->size() != h) return false;
  }
  if (w.x_stu_fut.size() != f) return false;
  for (std::size_t t = 0; t < h; ++t) {
    if (!(w.dx1_his[t] > 0.0) || !(w.dx2_his[t] > 0.0)) return false;
    if (std::abs(w.dx1_his[t] - (w.x_lea_his[t] - w.x_stu_his[t])) > 1e-9) return false;
    if (std::abs(w.dx2_his[t] - (w.x_stu_his[t] - w.x_fol_his[t])) > 1e-9) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  std::vector<PlatoonWindow> train;
  std::vector<PlatoonWindow> test;
  std::vector<int> train_platoons;
  std::vector<int> test_platoons;
};

/// Splits by source platoon so no platoon contributes to both sides.
inline Split split_train_test(const std::vector<PlatoonWindow>& windows, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::invalid_argument, "split ratio must lie in (0, 1)");
  std::set<int> ids;
  for (const auto& w : windows) ids.insert(w.meta.platoon_id);
  require(ids.size() >= 2, ErrorKind::data, "need at least 2 platoons to split, found " + std::to_string(ids.size()));

  std::vector<int> order(ids.begin(), ids.end());
  Rng rng = make_rng(seed, 0x5911);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<long>(order.size());
  const long n_train = std::clamp(std::lround(ratio * static_cast<double>(n)), 1L, n - 1);

  Split split;
  split.train_platoons.assign(order.begin(), order.begin() + n_train);
  split.test_platoons.assign(order.begin() + n_train, order.end());
  std::sort(split.train_platoons.begin(), split.train_platoons.end());
  std::sort(split.test_platoons.begin(), split.test_platoons.end());
  const std::set<int> train_ids(split.train_platoons.begin(), split.train_platoons.end());
  for (const auto& w : windows) {
    (train_ids.count(w.meta.platoon_id) ? split.train : split.test).push_back(w);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Persistence: windows.cfa (arrays) + windows.json (sidecar)

struct DatasetInfo {
  std::string source;  // "synthetic" or the ingested table path
  int stride = kDefaultStride;
  int platoon_length = kDefaultPlatoonFrames;
  std::size_t platoon_count = 0;
};

inline constexpr const char* kWindowsFile = "windows.cfa";
inline constexpr const char* kWindowsSidecar = "windows.json";

inline void save_windows(const std::filesystem::path& dir, const std::vector<PlatoonWindow>& windows,
                         const DatasetInfo& info) {
  require(!windows.empty(), ErrorKind::data, "refusing to save an empty window set");
  const auto n = static_cast<Eigen::Index>(windows.size());
  const Eigen::Index h = windows.front().history(), f = windows.front().future();
  auto pack = [&](auto member, Eigen::Index width) {
    Eigen::MatrixXd m(n, width);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::vector<double>& v = windows[static_cast<std::size_t>(i)].*member;
      require(static_cast<Eigen::Index>(v.size()) == width, ErrorKind::data, "inconsistent window lengths");
      for (Eigen::Index j = 0; j < width; ++j) m(i, j) = v[static_cast<std::size_t>(j)];
    }
    return m;
  };
  io::NamedArrays arrays;
  arrays["x_lea_his"] = pack(&PlatoonWindow::x_lea_his, h);
  arrays["x_stu_his"] = pack(&PlatoonWindow::x_stu_his, h);
  arrays["x_fol_his"] = pack(&PlatoonWindow::x_fol_his, h);
  arrays["v_lea_his"] = pack(&PlatoonWindow::v_lea_his, h);
  arrays["v_stu_his"] = pack(&PlatoonWindow::v_stu_his, h);
  arrays["v_fol_his"] = pack(&PlatoonWindow::v_fol_his, h);
  arrays["dx1_his"] = pack(&PlatoonWindow::dx1_his, h);
  arrays["dx2_his"] = pack(&PlatoonWindow::dx2_his, h);
  arrays["x_stu_fut"] = pack(&PlatoonWindow::x_stu_fut, f);
  arrays["x_lea_fut"] = pack(&PlatoonWindow::x_lea_fut, f);
  arrays["x_fol_fut"] = pack(&PlatoonWindow::x_fol_fut, f);
  Eigen::MatrixXd meta(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const WindowMeta& m = windows[static_cast<std::size_t>(i)].meta;
    meta.row(i) << m.platoon_id, m.leader_id, m.study_id, m.follower_id, m.start_frame;
  }
  arrays["meta"] = meta;
  io::write_arrays(dir / kWindowsFile, arrays);

  io::Json side = {
      {"format", "crossfusor-windows"},
      {"format_version", 1},
      {"count", windows.size()},
      {"history_frames", h},
      {"future_frames", f},
      {"units", {{"position", "ft"}, {"speed", "ft/s"}, {"frame_rate_hz", kFrameRateHz}}},
      {"stride", info.stride},
      {"platoon_length", info.platoon_length},
      {"platoon_count", info.platoon_count},
      {"source", info.source},
      {"meta_columns", {"platoon_id", "leader_id", "study_id", "follower_id", "start_frame"}},
  };
  io::write_json(dir / kWindowsSidecar, side);
}

struct LoadedDataset {
  std::vector<PlatoonWindow> windows;
  io::Json sidecar;
  WindowShape shape;
};

/// Accepts either the dataset directory or the windows.cfa path.
inline LoadedDataset load_windows(const std::filesystem::path& path) {
  const std::filesystem::path dir = std::filesystem::is_directory(path) ? path : path.parent_path();
  require(std::filesystem::exists(dir / kWindowsFile), ErrorKind::missing_input,
          "no " + std::string(kWindowsFile) + " under " + dir.string());
  LoadedDataset out;
  out.sidecar = io::read_json(dir / kWindowsSidecar);
  const auto arrays = io::read_arrays(dir / kWindowsFile);
  auto get = [&](const std::string& name) -> const Eigen::MatrixXd& {
    auto it = arrays.find(name);
    require(it != arrays.end(), ErrorKind::data, "window container lacks array '" + name + "'");
    return it->second;
  };
  const auto& meta = get("meta");
  const Eigen::Index n = meta.rows();
  out.shape.history = static_cast<int>(get("x_stu_his").cols());
  out.shape.future = static_cast<int>(get("x_stu_fut").cols());
  auto row = [&](const std::string& name, Eigen::Index i) {
    const auto& m = get(name);
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = m(i, j);
    return v;
  };
  out.windows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    PlatoonWindow w;
    w.x_lea_his = row("x_lea_his", i);
    w.x_stu_his = row("x_stu_his", i);
    w.x_fol_his = row("x_fol_his", i);
    w.v_lea_his = row("v_lea_his", i);
    w.v_stu_his = row("v_stu_his", i);
    w.v_fol_his = row("v_fol_his", i);
    w.dx1_his = row("dx1_his", i);
    w.dx2_his = row("dx2_his", i);
    w.x_stu_fut = row("x_stu_fut", i);
    w.x_lea_fut = row("x_lea_fut", i);
    w.x_fol_fut = row("x_fol_fut", i);
    w.meta = {static_cast<int>(meta(i, 0)), static_cast<int>(meta(i, 1)), static_cast<int>(meta(i, 2)),
              static_cast<int>(meta(i, 3)), static_cast<int>(meta(i, 4))};
    out.windows.push_back(std::move(w));
  }
  return out;
}

}  // namespace crossfusor::data
