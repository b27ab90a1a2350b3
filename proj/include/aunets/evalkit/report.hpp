#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "aunets/au.hpp"
#include "aunets/common.hpp"
#include "aunets/datakit/records.hpp"
#include "aunets/evalkit/metrics.hpp"

namespace aunets::evalkit {

// One line of the prediction CSV.
struct PredictionRow {
  std::string video_id;
  int frame = 0;
  std::string predicted_view;
  AUCode au;
  double prob_raw = 0;
  double prob_smoothed = 0;
  int decision_raw = 0;
  int decision_smoothed = 0;
};

inline std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  static const std::string header =
      "video_id,frame,predicted_view,au,prob_raw,prob_smoothed,decision_raw,decision_smoothed";
  if (!std::getline(in, line) || line != header) throw DataError(path.string() + ":1: unexpected prediction header");
  std::vector<PredictionRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 8) throw DataError(where + ": expected 8 fields");
    try {
      rows.push_back({f[0], std::stoi(f[1]), f[2], AUCode{parse_au_value(f[3])}, std::stod(f[4]), std::stod(f[5]),
                      std::stoi(f[6]), std::stoi(f[7])});
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return rows;
}

enum class GroupBy { None, View };

inline GroupBy parse_group_by(const std::string& s) {
  if (s == "none" || s.empty()) return GroupBy::None;
  if (s == "view") return GroupBy::View;
  throw std::invalid_argument("unknown grouping '" + s + "' (expected none or view)");
}

struct MetricRow {
  std::string group;
  std::string au;  // "AU12", or "Av." for the group mean
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  long frames = 0;
};

// Per-AU rows followed by an "Av." row (unweighted mean over the AU rows) for every group.
// `tags` (fold, fusion mode, ...) are carried into the rendered tables as leading columns.
struct MetricReport {
  std::vector<MetricRow> rows;
  std::map<std::string, std::string> tags;

  const MetricRow& average(const std::string& group = "all") const {
    for (const auto& r : rows)
      if (r.group == group && r.au == "Av.") return r;
    throw std::out_of_range("no average row for group " + group);
  }
};

inline MetricReport report(const std::vector<PredictionRow>& preds, const std::vector<datakit::FrameRecord>& labels,
                           GroupBy group_by = GroupBy::None, bool use_smoothed = true,
                           std::map<std::string, std::string> tags = {}) {
  std::map<std::pair<std::string, int>, const datakit::FrameRecord*> by_frame;
  for (const auto& r : labels) by_frame[{r.video_id, r.frame_index}] = &r;
  // group -> au -> (decisions, labels)
  std::map<std::string, std::map<AUCode, std::pair<std::vector<int>, std::vector<int>>>> tracks;
  for (const auto& p : preds) {
    const auto it = by_frame.find({p.video_id, p.frame});
    if (it == by_frame.end())
      throw DataError("no label for " + p.video_id + " frame " + std::to_string(p.frame));
    const auto& rec = *it->second;
    if (!rec.labels.count(p.au.value)) throw std::invalid_argument("unknown AU column " + to_string(p.au));
    std::string group = "all";
    if (group_by == GroupBy::View) group = rec.view ? to_string(*rec.view) : p.predicted_view;
    auto& t = tracks[group][p.au];
    t.first.push_back(use_smoothed ? p.decision_smoothed : p.decision_raw);
    t.second.push_back(rec.labels.at(p.au.value));
  }
  MetricReport rep;
  rep.tags = std::move(tags);
  for (const auto& [group, aus] : tracks) {
    MetricRow avg{group, "Av."};
    for (const auto& [au, t] : aus) {
      const auto m = f1_frame(t.first, t.second);
      MetricRow row{group, to_string(au), m.precision, m.recall, m.f1, accuracy(t.first, t.second),
                    static_cast<long>(t.first.size())};
      avg.precision += row.precision;
      avg.recall += row.recall;
      avg.f1 += row.f1;
      avg.accuracy += row.accuracy;
      avg.frames += row.frames;
      rep.rows.push_back(row);
    }
    const double n = static_cast<double>(aus.size());
    avg.precision /= n;
    avg.recall /= n;
    avg.f1 /= n;
    avg.accuracy /= n;
    rep.rows.push_back(avg);
  }
  return rep;
}

inline std::string render_text(const MetricReport& rep) {
  std::ostringstream out;
  for (const auto& [k, v] : rep.tags) out << k << ": " << v << '\n';
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %-6s %9s %9s %9s %9s %8s\n", "group", "AU", "P", "R", "F1", "ACC", "frames");
  out << buf;
  for (const auto& r : rep.rows) {
    if (r.au == "Av.") out << std::string(63, '-') << '\n';
    std::snprintf(buf, sizeof buf, "%-8s %-6s %9.4f %9.4f %9.4f %9.4f %8ld\n", r.group.c_str(), r.au.c_str(),
                  r.precision, r.recall, r.f1, r.accuracy, r.frames);
    out << buf;
  }
  return out.str();
}

inline std::string render_csv(const MetricReport& rep) {
  std::ostringstream out;
  for (const auto& [k, v] : rep.tags) out << k << ',';
  out << "group,au,precision,recall,f1,accuracy,frames\n";
  out.precision(9);
  for (const auto& r : rep.rows) {
    for (const auto& [k, v] : rep.tags) out << v << ',';
    out << r.group << ',' << r.au << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.accuracy << ','
        << r.frames << '\n';
  }
  return out.str();
}

inline void write_report(const std::filesystem::path& stem, const MetricReport& rep) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream txt(stem.string() + ".txt"), csv(stem.string() + ".csv");
  if (!txt || !csv) throw DataError("cannot write report " + stem.string());
  txt << render_text(rep);
  csv << render_csv(rep);
}

}  // namespace aunets::evalkit
