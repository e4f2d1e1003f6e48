#pragma once

// Four-regime textual reading of a trust point against per-agent
// quantile thresholds.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qtrust/trust_metrics.hpp"

namespace qtrust::narrative {

enum class Regime { LowVeeLowDnts, LowVeeHighDnts, HighVeeLowDnts, HighVeeHighDnts };

inline constexpr std::array<Regime, 4> kAllRegimes = {Regime::LowVeeLowDnts, Regime::LowVeeHighDnts,
                                                      Regime::HighVeeLowDnts, Regime::HighVeeHighDnts};

std::string_view regime_name(Regime r);
std::optional<Regime> parse_regime(std::string_view name);

struct NarrativeCalibration {
  double vee_threshold = 0.0;
  double dnts_threshold = 0.0;
  double vee_quantile = 0.75;
  double dnts_quantile = 0.75;
  std::size_t trace_count = 0;
  std::size_t sample_count = 0;
  bool operator==(const NarrativeCalibration&) const = default;
};

struct NarrativeStatement {
  Regime regime = Regime::LowVeeLowDnts;
  std::string text;
  double vee = 0.0;
  double dnts = 0.0;
  double vee_threshold = 0.0;
  double dnts_threshold = 0.0;
  bool operator==(const NarrativeStatement&) const = default;
};

class Templates {
 public:
  // The copy of resources/narrative_templates.txt compiled into the binary.
  static const Templates& builtin();
  static Templates load(const std::filesystem::path& path);
  // Throws std::invalid_argument if a regime is missing or duplicated.
  static Templates parse(std::istream& in);

  int version() const { return version_; }
  const std::string& text(Regime r) const { return text_[static_cast<std::size_t>(r)]; }
  std::string render(Regime r, double vee, double dnts, double vee_threshold, double dnts_threshold) const;

 private:
  int version_ = 0;
  std::array<std::string, 4> text_;
};

// Nearest-rank quantile: the ceil(q * n)-th smallest value (the minimum for
// q = 0). Throws on an empty input or q outside [0, 1].
double nearest_rank_quantile(std::vector<double> values, double q);

// Thresholds from the instantaneous VEE and DNTS values of every tick.
NarrativeCalibration calibrate(const std::vector<metrics::EpisodeTrace>& traces, const metrics::EmbeddingSet& set,
                               double vee_quantile = 0.75, double dnts_quantile = 0.75);

// "High" means strictly greater than the threshold.
Regime classify(double vee, double dnts, const NarrativeCalibration& cal);

NarrativeStatement narrate(const metrics::TrustPoint& point, const NarrativeCalibration& cal,
                           const Templates& templates = Templates::builtin());

nlohmann::json to_json(const NarrativeCalibration& cal);
NarrativeCalibration calibration_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NarrativeStatement& s);

}  // namespace qtrust::narrative
