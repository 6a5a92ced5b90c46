#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "heurevo/traj.hpp"

namespace heurevo {

inline constexpr std::size_t kDefaultObsLen = 8;
inline constexpr std::size_t kDefaultPredLen = 12;

struct TrackSample {
  std::int64_t frame = 0;
  double x = 0.0;
  double y = 0.0;
};

struct RawTrack {
  std::int64_t agent_id = 0;
  std::vector<TrackSample> samples;  // strictly increasing frame ids
};

/// Both layouts are `frame agent x y`; the format only selects the unit tag.
enum class FileFormat { kEthUcy, kSdd };

enum class SplitName { kEth, kHotel, kUniv, kZara1, kZara2, kSdd };

inline constexpr std::array<SplitName, 5> kEthUcySplits = {
    SplitName::kEth, SplitName::kHotel, SplitName::kUniv, SplitName::kZara1, SplitName::kZara2};

std::string to_string(SplitName name);
/// Throws ValidationError for names outside {eth, hotel, univ, zara1, zara2, sdd}.
SplitName parse_split_name(std::string_view name);
Unit unit_of(SplitName name);

struct DatasetSplit {
  SplitName name = SplitName::kEth;
  std::vector<Scene> scenes;
  Unit unit = Unit::kMeters;
};

struct WindowOptions {
  std::size_t t_obs = kDefaultObsLen;
  std::size_t t_pred = kDefaultPredLen;
  std::size_t stride = 1;
};

/// Parses `frame agent x y` rows. Blank lines are skipped; an empty input
/// yields no tracks. Rows are grouped by agent and sorted by frame.
std::vector<RawTrack> parse_trajectory_text(std::string_view text,
                                            const std::string& source = "<memory>");
std::vector<RawTrack> parse_trajectory_file(const std::filesystem::path& path,
                                            FileFormat format = FileFormat::kEthUcy);

/// Writes tracks back in the same four-column layout, sorted by (frame, agent).
void write_trajectory_text(std::ostream& out, const std::vector<RawTrack>& tracks);

/// Sliding windows of t_obs + t_pred consecutive distinct frames. An agent is
/// part of a window only when it has a sample at every frame of that window.
std::vector<Scene> build_scenes(const std::vector<RawTrack>& tracks, const WindowOptions& opts,
                                Unit unit = Unit::kMeters, const std::string& source = "scene");

struct LeaveOneOut {
  std::vector<SplitName> train;
  SplitName test = SplitName::kEth;
};

/// Train = the four other ETH-UCY splits. Throws ValidationError for sdd.
LeaveOneOut leave_one_out(SplitName test);
LeaveOneOut leave_one_out(std::string_view test);

/// Loads `<root>/<split>/<subset>/*.txt` in filename order.
DatasetSplit load_split(const std::filesystem::path& root, SplitName name,
                        const std::string& subset, const WindowOptions& opts = {});

struct LoadedLeaveOneOut {
  std::vector<DatasetSplit> train;
  DatasetSplit test;
};

/// Train splits come from each split's `train` subset, the test split from `test`.
LoadedLeaveOneOut load_leave_one_out(const std::filesystem::path& root, SplitName test,
                                     const WindowOptions& opts = {});

/// True when `<root>/<split>/<subset>` holds at least one .txt file.
bool split_available(const std::filesystem::path& root, SplitName name,
                     const std::string& subset);

}  // namespace heurevo
