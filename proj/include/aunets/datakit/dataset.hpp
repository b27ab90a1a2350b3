#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "aunets/common.hpp"
#include "aunets/datakit/records.hpp"
#include "aunets/io/png.hpp"

namespace aunets::datakit {

struct DatasetManifest {
  std::vector<int> au_set;
  std::vector<Viewpoint> views;
  std::uint64_t seed = 0;
  int image_side = 0;
  nlohmann::json raw;
};

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  DatasetManifest m;
  try {
    in >> m.raw;
    m.au_set = m.raw.at("au_set").get<std::vector<int>>();
    for (const auto& v : m.raw.at("views")) m.views.push_back(parse_view(v.get<std::string>()));
    m.seed = m.raw.value("seed", std::uint64_t{0});
    m.image_side = m.raw.value("image_side", 0);
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return m;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline int parse_int_field(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": '" + s + "' is not an integer");
  }
  if (used != s.size()) throw DataError(where + ": '" + s + "' is not an integer");
  return v;
}

struct VideoLocation {
  std::filesystem::path dir;
  std::string subject;
  std::optional<Viewpoint> view;
};

// video_id -> directory, found under subjects/{sid}/{view}/{video_id}.
inline std::map<std::string, VideoLocation> index_videos(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::map<std::string, VideoLocation> out;
  const fs::path subjects = root / "subjects";
  if (!fs::is_directory(subjects)) return out;
  for (const auto& s : fs::directory_iterator(subjects)) {
    if (!s.is_directory()) continue;
    for (const auto& v : fs::directory_iterator(s.path())) {
      if (!v.is_directory()) continue;
      std::optional<Viewpoint> view;
      try {
        view = parse_view(v.path().filename().string());
      } catch (const std::exception&) {
      }
      for (const auto& vid : fs::directory_iterator(v.path()))
        if (vid.is_directory())
          out[vid.path().filename().string()] = {vid.path(), s.path().filename().string(), view};
    }
  }
  return out;
}

}  // namespace detail

// Reads labels.csv (and manifest.json when present) into records sorted by (video_id, frame).
// A root without labels.csv is an empty dataset.
inline std::vector<FrameRecord> load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path labels_path = root / "labels.csv";
  if (!fs::exists(labels_path)) return {};
  std::optional<DatasetManifest> manifest;
  if (fs::exists(root / "manifest.json")) manifest = read_manifest(root / "manifest.json");

  std::ifstream in(labels_path);
  if (!in) throw DataError("cannot open " + labels_path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = detail::split_csv_line(line);
  static const std::vector<std::string> fixed{"video_id", "frame", "face_x", "face_y", "face_w", "face_h"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
    throw DataError(labels_path.string() + ":1: header must start with video_id,frame,face_x,face_y,face_w,face_h");
  std::vector<int> aus;
  for (std::size_t k = fixed.size(); k < header.size(); ++k) {
    try {
      if (header[k].rfind("AU", 0) != 0) throw std::invalid_argument("");
      aus.push_back(parse_au_value(header[k]));
    } catch (const std::exception&) {
      throw DataError(labels_path.string() + ":1: column '" + header[k] + "' is not an AU column");
    }
  }
  if (manifest) {
    auto a = aus, b = manifest->au_set;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw DataError(labels_path.string() + ":1: AU columns do not match the manifest AU set");
  }

  const auto videos = detail::index_videos(root);
  std::map<fs::path, std::pair<int, int>> image_sizes;
  std::vector<FrameRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = labels_path.string() + ":" + std::to_string(line_no);
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    FrameRecord r;
    r.video_id = f[0];
    r.frame_index = detail::parse_int_field(f[1], where);
    r.face_box = {detail::parse_int_field(f[2], where), detail::parse_int_field(f[3], where),
                  detail::parse_int_field(f[4], where), detail::parse_int_field(f[5], where)};
    for (std::size_t k = 0; k < aus.size(); ++k) {
      const int v = detail::parse_int_field(f[fixed.size() + k], where);
      if (v != 0 && v != 1)
        throw DataError(where + ": AU" + std::to_string(aus[k]) + " label must be 0 or 1, got " + f[fixed.size() + k]);
      r.labels[aus[k]] = v;
    }
    const auto loc = videos.find(r.video_id);
    if (loc == videos.end()) throw DataError(where + ": no frame directory for video " + r.video_id);
    r.image_path = loc->second.dir / frame_file_name(r.frame_index);
    r.subject_id = loc->second.subject;
    r.view = loc->second.view;
    if (manifest && manifest->image_side > 0) {
      r.image_width = r.image_height = manifest->image_side;
    } else {
      auto it = image_sizes.find(loc->second.dir);
      if (it == image_sizes.end()) {
        const auto png = io::read_png(r.image_path);
        it = image_sizes.emplace(loc->second.dir, std::pair{png.width, png.height}).first;
      }
      r.image_width = it->second.first;
      r.image_height = it->second.second;
    }
    if (!inside(r.face_box, r.image_width, r.image_height)) throw DataError(where + ": face box outside the image");
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return std::tie(a.video_id, a.frame_index) < std::tie(b.video_id, b.frame_index);
  });
  return records;
}

// Records grouped per video, each group in frame order.
inline std::vector<std::vector<FrameRecord>> group_by_video(const std::vector<FrameRecord>& records) {
  std::map<std::string, std::vector<FrameRecord>> m;
  for (const auto& r : records) m[r.video_id].push_back(r);
  std::vector<std::vector<FrameRecord>> out;
  for (auto& [id, v] : m) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace aunets::datakit
