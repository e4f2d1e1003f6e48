#pragma once

// Value Estimate Error and Distance to Nearest Training Sample over recorded
// episodes.
//
// Conventions:
//   realized_return(t)      = sum_{k>=t} gamma^(k-t) r_k          (complete trace)
//   vee_instant(t)          = |Q(s_t, a_t) - realized_return(t)|
//   vee_suffix(N)           = sum_{t=N}^{T} vee_instant(t)
//   vee_cumulative(N)       = sum_{t=0}^{N} |Q(s_t, a_t) - sum_{k=t}^{N} gamma^(k-t) r_k|
//   dnts(f)                 = min over training rows of ||row - f||^2  (squared)

#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qtrust/game.hpp"

namespace qtrust::metrics {

class IncompleteTrace : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TraceRecord {
  int t = 0;
  game::Observation obs;
  game::GameState state;  // s_t, before the action
  game::Action action = game::Action::NoOp;
  double reward = 0.0;   // r_t, received for taking a_t in s_t
  double q_value = 0.0;  // Q(s_t, a_t)
  std::vector<double> embedding;
};

struct EpisodeTrace {
  std::vector<TraceRecord> records;
  bool complete = false;  // last record's step ended the episode
  double gamma = 0.99;

  std::size_t size() const { return records.size(); }
};

enum class VeeMode { Instantaneous, SuffixSum, Cumulative };

std::string_view mode_name(VeeMode mode);
std::optional<VeeMode> parse_mode(std::string_view name);

struct TrustPoint {
  int t = 0;
  double vee = 0.0;
  double dnts = 0.0;
  VeeMode mode = VeeMode::Instantaneous;
  bool operator==(const TrustPoint&) const = default;
};

enum class Execution { Serial, Parallel };

// Row-major matrix of training-buffer embeddings.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  // Throws std::invalid_argument on an empty set, ragged data or
  // non-finite entries.
  EmbeddingSet(std::size_t dim, std::vector<double> data);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<const double> row(std::size_t i) const { return std::span(data_).subspan(i * dim_, dim_); }
  std::span<const double> data() const { return data_; }

  void add_row(std::span<const double> values);

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

double realized_return(const EpisodeTrace& trace, std::size_t t);
std::vector<double> realized_returns(const EpisodeTrace& trace);

double vee_instant(const EpisodeTrace& trace, std::size_t t);
double vee_suffix(const EpisodeTrace& trace, std::size_t n);
double vee_cumulative(const EpisodeTrace& trace, std::size_t n);

double dnts(std::span<const double> embedding, const EmbeddingSet& set, Execution exec = Execution::Parallel);

std::vector<TrustPoint> trace_curve(const EpisodeTrace& trace, const EmbeddingSet& set, VeeMode mode,
                                    Execution exec = Execution::Parallel);

// JSON-lines trace file: one header line, then one record per tick.
inline constexpr int kTraceSchemaVersion = 1;

struct TraceFileHeader {
  int schema_version = kTraceSchemaVersion;
  double gamma = 0.99;
  VeeMode mode = VeeMode::Instantaneous;
  std::string agent_id;
  std::size_t ticks = 0;
  bool complete = false;
};

struct TraceFileRow {
  int t = 0;
  std::string action;
  double reward = 0.0;
  double q_value = 0.0;
  std::optional<double> realized_return;
  double vee = 0.0;
  double dnts = 0.0;
  std::int64_t score = 0;
  int lives = 0;
};

void write_trace_jsonl(std::ostream& out, const EpisodeTrace& trace, const std::vector<TrustPoint>& points,
                       const std::string& agent_id);

struct TraceFile {
  TraceFileHeader header;
  std::vector<TraceFileRow> rows;
};
TraceFile read_trace_jsonl(std::istream& in);

nlohmann::json to_json(const TrustPoint& p);

}  // namespace qtrust::metrics
