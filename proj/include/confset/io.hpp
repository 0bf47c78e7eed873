#pragma once

// JSON forms of the library types and single-column CSV samples.

#include "confset/density.hpp"
#include "confset/inference.hpp"
#include "confset/wavelet.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace confset {

using json = nlohmann::json;

namespace detail {

/// Non-finite values as strings, since JSON has no literal for them.
inline json number_to_json(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const json& j)
{
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("bad number: " + s);
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

} // namespace detail

inline json to_json(const CoeffTree& t)
{
  json levels = json::array();
  levels.push_back(std::vector<double>(t.scaling().begin(), t.scaling().end()));
  for (int l = t.j0(); l < t.jmax(); ++l) levels.push_back(std::vector<double>(t.level(l).begin(), t.level(l).end()));
  return { { "j0", t.j0() }, { "jmax", t.jmax() }, { "levels", levels } };
}

inline CoeffTree tree_from_json(const json& j)
{
  CoeffTree t(j.at("j0").get<int>(), j.at("jmax").get<int>());
  const auto& levels = j.at("levels");
  if (levels.size() != static_cast<std::size_t>(t.jmax() - t.j0() + 1))
    throw std::invalid_argument("coefficient tree has the wrong number of levels");
  auto fill = [](std::span<double> dst, const json& src) {
    if (src.size() != dst.size()) throw std::invalid_argument("coefficient level has the wrong length");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k].get<double>();
  };
  fill(t.scaling(), levels[0]);
  for (int l = t.j0(); l < t.jmax(); ++l) fill(t.level(l), levels[static_cast<std::size_t>(l - t.j0() + 1)]);
  return t;
}

inline json to_json(const DensityModel& f)
{
  json j = to_json(f.tree());
  j["grid_depth"] = f.basis().grid_depth();
  j["basis"] = f.basis().name();
  j["labels"] = { { "id", f.labels().id },
                  { "s", detail::number_to_json(f.labels().claimed_s) },
                  { "B", detail::number_to_json(f.labels().claimed_B) } };
  return j;
}

inline DensityModel density_from_json(const json& j)
{
  auto basis = WaveletBasis::from_name(j.value("basis", std::string("haar")), j.at("grid_depth").get<int>());
  DensityLabels labels;
  if (j.contains("labels")) {
    const auto& l = j.at("labels");
    labels.id = l.value("id", std::string());
    labels.claimed_s = detail::number_from_json(l.value("s", json()));
    labels.claimed_B = detail::number_from_json(l.value("B", json()));
  }
  return DensityModel(std::move(basis), tree_from_json(j), std::move(labels));
}

inline json to_json(const TestVerdict& v)
{
  return { { "reject", v.reject },
           { "statistic", detail::number_to_json(v.statistic) },
           { "threshold", detail::number_to_json(v.threshold) },
           { "jn", v.jn } };
}

inline TestVerdict verdict_from_json(const json& j)
{
  TestVerdict v;
  v.reject = j.at("reject").get<bool>();
  v.statistic = detail::number_from_json(j.at("statistic"));
  v.threshold = detail::number_from_json(j.at("threshold"));
  v.jn = j.at("jn").get<int>();
  return v;
}

inline json to_json(const ConfidenceBall& b)
{
  return { { "center", to_json(b.center) },
           { "radius", b.radius },
           { "level_used", b.level_used },
           { "meta", to_string(b.meta) } };
}

inline ConfidenceBall ball_from_json(const json& j)
{
  ConfidenceBall b;
  b.center = tree_from_json(j.at("center"));
  b.radius = j.at("radius").get<double>();
  b.level_used = j.at("level_used").get<int>();
  b.meta = ball_tag_from_string(j.at("meta").get<std::string>());
  return b;
}

inline json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One observation per line, no header.
inline void write_sample_csv(const std::string& path, std::span<const double> sample)
{
  std::string text;
  for (double x : sample) {
    text += format_double(x);
    text += '\n';
  }
  write_text_file(path, text);
}

inline std::vector<double> read_sample_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0')
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a number");
    out.push_back(v);
  }
  return out;
}

} // namespace confset
