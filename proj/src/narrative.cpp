#include "qtrust/narrative.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qtrust/narrative_templates_builtin.hpp"

namespace qtrust::narrative {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void replace_all(std::string& s, std::string_view key, const std::string& value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
    s.replace(pos, key.size(), value);
}

}  // namespace

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::LowVeeLowDnts: return "low-vee/low-dnts";
    case Regime::LowVeeHighDnts: return "low-vee/high-dnts";
    case Regime::HighVeeLowDnts: return "high-vee/low-dnts";
    case Regime::HighVeeHighDnts: return "high-vee/high-dnts";
  }
  return "";
}

std::optional<Regime> parse_regime(std::string_view name) {
  for (Regime r : kAllRegimes)
    if (regime_name(r) == name) return r;
  return std::nullopt;
}

const Templates& Templates::builtin() {
  static const Templates templates = [] {
    std::istringstream in{std::string(kBuiltinNarrativeTemplates)};
    return parse(in);
  }();
  return templates;
}

Templates Templates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open narrative templates " + path.string());
  return parse(in);
}

Templates Templates::parse(std::istream& in) {
  Templates t;
  std::array<bool, 4> seen{};
  std::string line;
  while (std::getline(in, line)) {
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("template line without '=': " + body);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "version") {
      t.version_ = std::stoi(value);
      continue;
    }
    const auto regime = parse_regime(key);
    if (!regime) throw std::invalid_argument("unknown regime in templates: " + key);
    const auto i = static_cast<std::size_t>(*regime);
    if (seen[i]) throw std::invalid_argument("duplicate template for " + key);
    seen[i] = true;
    t.text_[i] = value;
  }
  if (t.version_ <= 0) throw std::invalid_argument("templates must declare a positive version");
  for (Regime r : kAllRegimes)
    if (!seen[static_cast<std::size_t>(r)])
      throw std::invalid_argument("missing template for " + std::string(regime_name(r)));
  return t;
}

std::string Templates::render(Regime r, double vee, double dnts, double vee_threshold,
                              double dnts_threshold) const {
  std::string s = text(r);
  replace_all(s, "{vee}", format_number(vee));
  replace_all(s, "{dnts}", format_number(dnts));
  replace_all(s, "{vee_threshold}", format_number(vee_threshold));
  replace_all(s, "{dnts_threshold}", format_number(dnts_threshold));
  return s;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

NarrativeCalibration calibrate(const std::vector<metrics::EpisodeTrace>& traces, const metrics::EmbeddingSet& set,
                               double vee_quantile, double dnts_quantile) {
  if (traces.empty()) throw std::invalid_argument("calibration needs at least one trace");
  std::vector<double> vees;
  std::vector<double> distances;
  for (const auto& trace : traces) {
    for (const auto& p : metrics::trace_curve(trace, set, metrics::VeeMode::Instantaneous)) {
      vees.push_back(p.vee);
      distances.push_back(p.dnts);
    }
  }
  if (vees.empty()) throw std::invalid_argument("calibration traces contain no ticks");
  NarrativeCalibration cal;
  cal.vee_threshold = nearest_rank_quantile(vees, vee_quantile);
  cal.dnts_threshold = nearest_rank_quantile(distances, dnts_quantile);
  cal.vee_quantile = vee_quantile;
  cal.dnts_quantile = dnts_quantile;
  cal.trace_count = traces.size();
  cal.sample_count = vees.size();
  return cal;
}

Regime classify(double vee, double dnts, const NarrativeCalibration& cal) {
  const bool high_vee = vee > cal.vee_threshold;
  const bool high_dnts = dnts > cal.dnts_threshold;
  if (high_vee) return high_dnts ? Regime::HighVeeHighDnts : Regime::HighVeeLowDnts;
  return high_dnts ? Regime::LowVeeHighDnts : Regime::LowVeeLowDnts;
}

NarrativeStatement narrate(const metrics::TrustPoint& point, const NarrativeCalibration& cal,
                           const Templates& templates) {
  NarrativeStatement s;
  s.regime = classify(point.vee, point.dnts, cal);
  s.text = templates.render(s.regime, point.vee, point.dnts, cal.vee_threshold, cal.dnts_threshold);
  s.vee = point.vee;
  s.dnts = point.dnts;
  s.vee_threshold = cal.vee_threshold;
  s.dnts_threshold = cal.dnts_threshold;
  return s;
}

json to_json(const NarrativeCalibration& cal) {
  return {{"vee_threshold", cal.vee_threshold}, {"dnts_threshold", cal.dnts_threshold},
          {"vee_quantile", cal.vee_quantile},   {"dnts_quantile", cal.dnts_quantile},
          {"trace_count", cal.trace_count},     {"sample_count", cal.sample_count}};
}

NarrativeCalibration calibration_from_json(const json& j) {
  NarrativeCalibration cal;
  cal.vee_threshold = j.at("vee_threshold").get<double>();
  cal.dnts_threshold = j.at("dnts_threshold").get<double>();
  cal.vee_quantile = j.at("vee_quantile").get<double>();
  cal.dnts_quantile = j.at("dnts_quantile").get<double>();
  cal.trace_count = j.at("trace_count").get<std::size_t>();
  cal.sample_count = j.at("sample_count").get<std::size_t>();
  return cal;
}

json to_json(const NarrativeStatement& s) {
  return {{"regime", regime_name(s.regime)}, {"text", s.text},
          {"vee", s.vee},                    {"dnts", s.dnts},
          {"vee_threshold", s.vee_threshold}, {"dnts_threshold", s.dnts_threshold}};
}

}  // namespace qtrust::narrative
