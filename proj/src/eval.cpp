#include "fruitloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "fruitloc/error.hpp"

namespace fruitloc::eval {

double MatchedPair::distance_cm() const { return std::hypot(dx_cm, dy_cm); }

MatchResult MatchResult::restricted_to(detect::FruitKind crop) const {
  MatchResult out;
  out.frame_id = frame_id;
  out.truths = truths;
  out.detections = detections;
  for (const auto& p : pairs) {
    if (truths[p.truth_index].label.kind() == crop) out.pairs.push_back(p);
  }
  for (std::size_t t : misses) {
    if (truths[t].label.kind() == crop) out.misses.push_back(t);
  }
  for (std::size_t d : ghosts) {
    if (detections[d].label().kind() == crop) out.ghosts.push_back(d);
  }
  // Drop other crops' truths from the denominator while keeping indices valid.
  std::vector<scene::GroundTruthFruit> kept;
  std::vector<std::size_t> remap(truths.size(), 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].label.kind() == crop) {
      remap[i] = kept.size();
      kept.push_back(truths[i]);
    }
  }
  for (auto& p : out.pairs) p.truth_index = remap[p.truth_index];
  for (auto& t : out.misses) t = remap[t];
  out.truths = std::move(kept);
  return out;
}

MatchResult match_detections(const scene::GroundTruth& truth,
                             std::span<const detect::Detection> detections,
                             const geometry::Homography& h, double threshold_cm,
                             std::string frame_id) {
  if (!(threshold_cm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match threshold must be > 0");
  }
  MatchResult out;
  out.frame_id = std::move(frame_id);
  out.truths = truth.fruits;
  out.detections.assign(detections.begin(), detections.end());

  std::vector<std::optional<geometry::WorldPoint>> localised(detections.size());
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (!detections[d].label().is_fruit()) continue;
    try {
      localised[d] = geometry::apply_homography(h, detections[d].picking_point());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kPointAtInfinity) throw;
    }
  }

  struct Candidate {
    double distance;
    std::size_t truth;
    std::size_t det;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < truth.fruits.size(); ++t) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      if (!localised[d] || detections[d].label() != truth.fruits[t].label) continue;
      const double dist = std::hypot(localised[d]->x - truth.fruits[t].world.x,
                                     localised[d]->y - truth.fruits[t].world.y);
      if (dist <= threshold_cm) candidates.push_back({dist, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    const double ca = detections[a.det].confidence();
    const double cb = detections[b.det].confidence();
    if (ca != cb) return ca > cb;
    return std::tie(a.det, a.truth) < std::tie(b.det, b.truth);
  });

  std::vector<bool> truth_used(truth.fruits.size(), false);
  std::vector<bool> det_used(detections.size(), false);
  for (const auto& c : candidates) {
    if (truth_used[c.truth] || det_used[c.det]) continue;
    truth_used[c.truth] = true;
    det_used[c.det] = true;
    const geometry::WorldPoint& w = *localised[c.det];
    out.pairs.push_back({c.truth, c.det, w, w.x - truth.fruits[c.truth].world.x,
                         w.y - truth.fruits[c.truth].world.y});
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const MatchedPair& a, const MatchedPair& b) {
    return a.truth_index < b.truth_index;
  });
  for (std::size_t t = 0; t < truth.fruits.size(); ++t) {
    if (!truth_used[t]) out.misses.push_back(t);
  }
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (!det_used[d] && detections[d].label().is_fruit()) out.ghosts.push_back(d);
  }
  return out;
}

double detection_rate(std::span<const MatchResult> results) {
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const auto& r : results) {
    total += r.truths.size();
    matched += r.pairs.size();
  }
  if (total == 0) throw Error(ErrorCode::kEmptyInput, "no ground-truth fruits");
  return 100.0 * static_cast<double>(matched) / static_cast<double>(total);
}

AxisErrors localisation_error(std::span<const MatchResult> results) {
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::size_t n = 0;
  for (const auto& r : results) {
    for (const auto& p : r.pairs) {
      sum_x += std::abs(p.dx_cm);
      sum_y += std::abs(p.dy_cm);
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::kNoMatches, "no matched detections");
  return {sum_x / static_cast<double>(n), sum_y / static_cast<double>(n)};
}

std::string pair_dump(std::span<const MatchResult> results) {
  std::string out;
  for (const auto& r : results) {
    for (const auto& p : r.pairs) {
      nlohmann::ordered_json rec;
      rec["kind"] = "pair";
      rec["frame"] = r.frame_id;
      rec["truth_id"] = p.truth_index;
      rec["det_id"] = p.detection_index;
      rec["label"] = r.truths[p.truth_index].label.name();
      rec["dx_cm"] = p.dx_cm;
      rec["dy_cm"] = p.dy_cm;
      out += rec.dump() + "\n";
    }
    for (std::size_t t : r.misses) {
      nlohmann::ordered_json rec;
      rec["kind"] = "miss";
      rec["frame"] = r.frame_id;
      rec["truth_id"] = t;
      rec["label"] = r.truths[t].label.name();
      out += rec.dump() + "\n";
    }
    for (std::size_t d : r.ghosts) {
      nlohmann::ordered_json rec;
      rec["kind"] = "ghost";
      rec["frame"] = r.frame_id;
      rec["det_id"] = d;
      rec["label"] = r.detections[d].label().name();
      out += rec.dump() + "\n";
    }
  }
  return out;
}

namespace {

int condition_rank(const std::string& c) {
  if (c == "indoor") return 0;
  if (c == "shaded") return 1;
  if (c == "direct_sun") return 2;
  return 3;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string optional_fixed(const std::optional<double>& v, int digits, const char* none) {
  return v ? fixed(*v, digits) : std::string(none);
}

nlohmann::ordered_json nullable(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

MetricsReport aggregate(std::span<const FrameOutcome> outcomes) {
  using Key = std::tuple<int, int, int, std::string>;  // crop, !disturbances, condition
  std::map<Key, std::vector<MatchResult>> groups;
  std::map<Key, std::size_t> frame_counts;
  for (const auto& o : outcomes) {
    for (const auto crop : {detect::FruitKind::kOrange, detect::FruitKind::kApple}) {
      const Key key{crop == detect::FruitKind::kOrange ? 0 : 1, o.disturbances ? 0 : 1,
                    condition_rank(o.condition), o.condition};
      groups[key].push_back(o.match.restricted_to(crop));
    }
  }

  MetricsReport report;
  for (const auto& [key, results] : groups) {
    MetricsRow row;
    row.crop = std::get<0>(key) == 0 ? "orange" : "apple";
    row.disturbances = std::get<1>(key) == 0;
    row.condition = std::get<3>(key);
    row.n_patterns = results.size();
    for (const auto& r : results) {
      row.n_fruits += r.truths.size();
      row.n_matched += r.pairs.size();
      row.n_ghosts += r.ghosts.size();
    }
    if (row.n_fruits == 0) continue;
    row.detection_pct = detection_rate(results);
    if (row.n_matched > 0) {
      const AxisErrors e = localisation_error(results);
      row.x_mean_cm = e.x_mean_cm;
      row.y_mean_cm = e.y_mean_cm;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "table") return ReportFormat::kTable;
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw Error(ErrorCode::kInvalidArgument, "unknown report format '" + std::string(name) + "'");
}

std::string emit_report(const MetricsReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kCsv: {
      std::string out =
          "crop,condition,disturbances,x_mean_cm,y_mean_cm,detection_pct,n_patterns,n_fruits\n";
      for (const auto& r : report.rows) {
        out += r.crop + "," + r.condition + "," + (r.disturbances ? "with" : "without") + "," +
               optional_fixed(r.x_mean_cm, 4, "") + "," + optional_fixed(r.y_mean_cm, 4, "") + "," +
               fixed(r.detection_pct, 2) + "," + std::to_string(r.n_patterns) + "," +
               std::to_string(r.n_fruits) + "\n";
      }
      return out;
    }
    case ReportFormat::kJson: {
      nlohmann::ordered_json doc;
      doc["schema"] = "fruitloc.metrics";
      doc["version"] = 1;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["crop"] = r.crop;
        row["condition"] = r.condition;
        row["disturbances"] = r.disturbances;
        row["x_mean_cm"] = nullable(r.x_mean_cm);
        row["y_mean_cm"] = nullable(r.y_mean_cm);
        row["detection_pct"] = r.detection_pct;
        row["n_patterns"] = r.n_patterns;
        row["n_fruits"] = r.n_fruits;
        row["n_matched"] = r.n_matched;
        row["n_ghosts"] = r.n_ghosts;
        rows.push_back(std::move(row));
      }
      doc["rows"] = std::move(rows);
      return doc.dump(2) + "\n";
    }
    case ReportFormat::kTable: {
      char line[256];
      std::string out;
      std::snprintf(line, sizeof(line), "%-7s %-11s %-12s %10s %10s %10s %9s %8s %7s\n", "crop",
                    "condition", "disturbance", "X mean cm", "Y mean cm", "detect %", "patterns",
                    "fruits", "ghosts");
      out += line;
      for (const auto& r : report.rows) {
        std::snprintf(line, sizeof(line), "%-7s %-11s %-12s %10s %10s %10s %9zu %8zu %7zu\n",
                      r.crop.c_str(), r.condition.c_str(), r.disturbances ? "with" : "without",
                      optional_fixed(r.x_mean_cm, 3, "n/a").c_str(),
                      optional_fixed(r.y_mean_cm, 3, "n/a").c_str(),
                      fixed(r.detection_pct, 1).c_str(), r.n_patterns, r.n_fruits, r.n_ghosts);
        out += line;
      }
      return out;
    }
  }
  return {};
}

MetricsReport report_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema").get<std::string>() != "fruitloc.metrics") {
      throw Error(ErrorCode::kInvalidArgument, "not a metrics report");
    }
    if (doc.at("version").get<int>() != 1) {
      throw Error(ErrorCode::kInvalidArgument, "unsupported metrics report version");
    }
    MetricsReport report;
    for (const auto& r : doc.at("rows")) {
      MetricsRow row;
      row.crop = r.at("crop").get<std::string>();
      row.condition = r.at("condition").get<std::string>();
      row.disturbances = r.at("disturbances").get<bool>();
      if (!r.at("x_mean_cm").is_null()) row.x_mean_cm = r["x_mean_cm"].get<double>();
      if (!r.at("y_mean_cm").is_null()) row.y_mean_cm = r["y_mean_cm"].get<double>();
      row.detection_pct = r.at("detection_pct").get<double>();
      row.n_patterns = r.at("n_patterns").get<std::size_t>();
      row.n_fruits = r.at("n_fruits").get<std::size_t>();
      row.n_matched = r.value("n_matched", std::size_t{0});
      row.n_ghosts = r.value("n_ghosts", std::size_t{0});
      report.rows.push_back(std::move(row));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid metrics report: ") + e.what());
  }
}

BenchmarkResult run_benchmark(std::span<const Frame> frames, const Detector& detector,
                              const geometry::Homography& h, double threshold_cm) {
  BenchmarkResult out;
  out.outcomes.reserve(frames.size());
  for (const auto& frame : frames) {
    const auto detections = detector(frame);
    out.outcomes.push_back(
        {frame.condition, frame.disturbances,
         match_detections(frame.truth, detections, h, threshold_cm, frame.frame_id)});
  }
  out.report = aggregate(out.outcomes);
  return out;
}

}  // namespace fruitloc::eval
