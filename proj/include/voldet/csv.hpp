#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "voldet/box.hpp"

// Annotation CSV: `image_id,min_z,min_y,min_x,max_z,max_y,max_x` in voxel
// coordinates of the (possibly resampled) volume; prediction CSV appends a
// `score` column. Values are written in shortest round-trip form, so a
// load/save cycle is byte-stable.

namespace voldet {

struct AnnotationRow {
  std::string image_id;
  BoxF box;
};

inline constexpr const char* kGtCsvHeader =
    "image_id,min_z,min_y,min_x,max_z,max_y,max_x";
inline constexpr const char* kPredCsvHeader =
    "image_id,min_z,min_y,min_x,max_z,max_y,max_x,score";

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::runtime_error("csv: bad number \"" + s + "\" " + context);
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

/// Reads a GT or prediction CSV; the header decides whether scores are
/// present. Box validity is enforced per row.
inline std::vector<AnnotationRow> load_boxes_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool with_score;
  if (line == kGtCsvHeader) {
    with_score = false;
  } else if (line == kPredCsvHeader) {
    with_score = true;
  } else {
    throw std::runtime_error("csv: unrecognized header in " + path);
  }

  std::vector<AnnotationRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::size_t want = with_score ? 8 : 7;
    const std::string where =
        "at " + path + ":" + std::to_string(lineno);
    if (f.size() != want)
      throw std::runtime_error("csv: expected " + std::to_string(want) +
                               " fields " + where);
    AnnotationRow row;
    row.image_id = f[0];
    if (row.image_id.empty())
      throw std::runtime_error("csv: empty image_id " + where);
    for (int i = 0; i < 3; ++i) {
      row.box.min[i] = detail::parse_double(f[static_cast<std::size_t>(1 + i)], where);
      row.box.max[i] = detail::parse_double(f[static_cast<std::size_t>(4 + i)], where);
    }
    if (with_score) row.box.score = detail::parse_double(f[7], where);
    try {
      check_box(row.box);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("csv: ") + e.what() + " " + where);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string boxes_csv_string(const std::vector<AnnotationRow>& rows,
                                    bool with_score) {
  std::ostringstream out;
  out << (with_score ? kPredCsvHeader : kGtCsvHeader) << "\n";
  for (const AnnotationRow& r : rows) {
    if (r.image_id.find(',') != std::string::npos ||
        r.image_id.find('\n') != std::string::npos)
      throw std::invalid_argument("csv: image_id must not contain ',' or newline");
    if (with_score && !r.box.score)
      throw std::invalid_argument("csv: prediction row without score");
    out << r.image_id;
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(r.box.min[i]);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(r.box.max[i]);
    if (with_score) out << ',' << detail::format_double(*r.box.score);
    out << '\n';
  }
  return out.str();
}

inline void save_boxes_csv(const std::string& path,
                           const std::vector<AnnotationRow>& rows,
                           bool with_score) {
  const std::string body = boxes_csv_string(rows, with_score);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << body;
  if (!out) throw std::runtime_error("csv: write failed: " + path);
}

/// Rows grouped by image id (sorted by id); row order within an id is kept.
inline std::map<std::string, std::vector<BoxF>> group_by_image(
    const std::vector<AnnotationRow>& rows) {
  std::map<std::string, std::vector<BoxF>> out;
  for (const AnnotationRow& r : rows) out[r.image_id].push_back(r.box);
  return out;
}

}  // namespace voldet
