#include "heurevo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "heurevo/error.hpp"

namespace heurevo {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 6> kSplitNames = {"eth",   "hotel", "univ",
                                                         "zara1", "zara2", "sdd"};

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::int64_t as_integer_id(double v, const std::string& source, std::size_t line,
                           const char* what) {
  const double rounded = std::round(v);
  if (!std::isfinite(v) || std::abs(v - rounded) > 1e-6) {
    throw ParseError(source, line, std::string(what) + " is not an integer");
  }
  return static_cast<std::int64_t>(rounded);
}

std::string layout_hint(const fs::path& root) {
  return "expected layout <root>/<split>/{train,val,test}/*.txt with columns "
         "`frame_id agent_id x y` (root = " + root.string() + ")";
}

}  // namespace

std::string to_string(SplitName name) {
  return std::string(kSplitNames[static_cast<std::size_t>(name)]);
}

SplitName parse_split_name(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == name) return static_cast<SplitName>(i);
  }
  throw ValidationError("unknown split '" + std::string(name) +
                        "' (expected eth, hotel, univ, zara1, zara2 or sdd)");
}

Unit unit_of(SplitName name) { return name == SplitName::kSdd ? Unit::kPixels : Unit::kMeters; }

std::vector<RawTrack> parse_trajectory_text(std::string_view text, const std::string& source) {
  std::map<std::int64_t, std::vector<TrackSample>> by_agent;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    std::array<std::string_view, 4> fields;
    std::size_t n = 0;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      if (n < fields.size()) fields[n] = line.substr(i, j - i);
      ++n;
      i = j;
    }
    if (n == 0) continue;
    if (n < 4) {
      throw ParseError(source, line_no,
                       "expected 4 fields (frame agent x y), got " + std::to_string(n));
    }
    std::array<double, 4> v{};
    for (std::size_t f = 0; f < 4; ++f) {
      if (!parse_double(fields[f], v[f]) || !std::isfinite(v[f])) {
        throw ParseError(source, line_no, "invalid number '" + std::string(fields[f]) + "'");
      }
    }
    const auto frame = as_integer_id(v[0], source, line_no, "frame id");
    const auto agent = as_integer_id(v[1], source, line_no, "agent id");
    by_agent[agent].push_back({frame, v[2], v[3]});
  }

  std::vector<RawTrack> tracks;
  tracks.reserve(by_agent.size());
  for (auto& [agent, samples] : by_agent) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const TrackSample& a, const TrackSample& b) { return a.frame < b.frame; });
    for (std::size_t s = 1; s < samples.size(); ++s) {
      if (samples[s].frame == samples[s - 1].frame) {
        throw ParseError(source, 0,
                         "duplicate frame " + std::to_string(samples[s].frame) + " for agent " +
                             std::to_string(agent));
      }
    }
    tracks.push_back({agent, std::move(samples)});
  }
  return tracks;
}

std::vector<RawTrack> parse_trajectory_file(const fs::path& path, FileFormat) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open trajectory file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trajectory_text(buf.str(), path.string());
}

void write_trajectory_text(std::ostream& out, const std::vector<RawTrack>& tracks) {
  struct Row {
    std::int64_t frame, agent;
    double x, y;
  };
  std::vector<Row> rows;
  for (const auto& t : tracks) {
    for (const auto& s : t.samples) rows.push_back({s.frame, t.agent_id, s.x, s.y});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.agent < b.agent;
  });
  const auto flags = out.flags();
  out << std::setprecision(17);
  for (const auto& r : rows) out << r.frame << '\t' << r.agent << '\t' << r.x << '\t' << r.y << '\n';
  out.flags(flags);
}

std::vector<Scene> build_scenes(const std::vector<RawTrack>& tracks, const WindowOptions& opts,
                                Unit unit, const std::string& source) {
  std::vector<Scene> scenes;
  if (opts.t_obs < 2 || opts.t_pred < 1 || opts.stride < 1) return scenes;
  const std::size_t seq_len = opts.t_obs + opts.t_pred;

  std::vector<std::int64_t> frames;
  for (const auto& t : tracks) {
    for (const auto& s : t.samples) frames.push_back(s.frame);
  }
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  if (frames.size() < seq_len) return scenes;

  std::unordered_map<std::int64_t, std::size_t> frame_index;
  for (std::size_t i = 0; i < frames.size(); ++i) frame_index[frames[i]] = i;

  // Tracks ordered by agent id so scene agent order is ascending.
  std::vector<const RawTrack*> ordered;
  for (const auto& t : tracks) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const RawTrack* a, const RawTrack* b) { return a->agent_id < b->agent_id; });

  for (std::size_t start = 0; start + seq_len <= frames.size(); start += opts.stride) {
    std::vector<const TrackSample*> members;  // seq_len pointers per qualifying agent
    std::size_t agents = 0;
    for (const RawTrack* track : ordered) {
      const auto& s = track->samples;
      auto it = std::lower_bound(
          s.begin(), s.end(), frames[start],
          [](const TrackSample& sample, std::int64_t f) { return sample.frame < f; });
      if (it == s.end() || it->frame != frames[start]) continue;
      const auto first = static_cast<std::size_t>(it - s.begin());
      if (first + seq_len > s.size()) continue;
      bool contiguous = true;
      for (std::size_t k = 0; k < seq_len; ++k) {
        if (s[first + k].frame != frames[start + k]) {
          contiguous = false;
          break;
        }
      }
      if (!contiguous) continue;
      for (std::size_t k = 0; k < seq_len; ++k) members.push_back(&s[first + k]);
      ++agents;
    }
    if (agents == 0) continue;

    Scene scene;
    scene.scene_id = source + ":" + std::to_string(frames[start]);
    scene.history = TrajTensor(agents, opts.t_obs, unit);
    scene.future = TrajTensor(agents, opts.t_pred, unit);
    for (std::size_t a = 0; a < agents; ++a) {
      for (std::size_t k = 0; k < seq_len; ++k) {
        const TrackSample* p = members[a * seq_len + k];
        if (k < opts.t_obs) {
          scene.history.set(a, k, {p->x, p->y});
        } else {
          scene.future.set(a, k - opts.t_obs, {p->x, p->y});
        }
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

LeaveOneOut leave_one_out(SplitName test) {
  if (test == SplitName::kSdd) {
    throw ValidationError("leave-one-out is defined over eth, hotel, univ, zara1, zara2 only");
  }
  LeaveOneOut out;
  out.test = test;
  for (SplitName s : kEthUcySplits) {
    if (s != test) out.train.push_back(s);
  }
  return out;
}

LeaveOneOut leave_one_out(std::string_view test) { return leave_one_out(parse_split_name(test)); }

namespace {

std::vector<fs::path> split_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

bool split_available(const fs::path& root, SplitName name, const std::string& subset) {
  return !split_files(root / to_string(name) / subset).empty();
}

DatasetSplit load_split(const fs::path& root, SplitName name, const std::string& subset,
                        const WindowOptions& opts) {
  const fs::path dir = root / to_string(name) / subset;
  const auto files = split_files(dir);
  if (files.empty()) {
    throw ValidationError("no trajectory files in " + dir.string() + "; " + layout_hint(root));
  }
  DatasetSplit split;
  split.name = name;
  split.unit = unit_of(name);
  const FileFormat format = name == SplitName::kSdd ? FileFormat::kSdd : FileFormat::kEthUcy;
  for (const auto& file : files) {
    auto scenes = build_scenes(parse_trajectory_file(file, format), opts, split.unit,
                               to_string(name) + "/" + file.filename().string());
    std::move(scenes.begin(), scenes.end(), std::back_inserter(split.scenes));
  }
  return split;
}

LoadedLeaveOneOut load_leave_one_out(const fs::path& root, SplitName test,
                                     const WindowOptions& opts) {
  const LeaveOneOut names = leave_one_out(test);
  LoadedLeaveOneOut out;
  for (SplitName s : names.train) out.train.push_back(load_split(root, s, "train", opts));
  out.test = load_split(root, test, "test", opts);
  return out;
}

}  // namespace heurevo
