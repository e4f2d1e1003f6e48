#include "qtrust/trust_metrics.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "qtrust/kernels.hpp"

namespace qtrust::metrics {

using nlohmann::json;

namespace {

void require_complete(const EpisodeTrace& trace) {
  if (!trace.complete) throw IncompleteTrace("trace must run to the end of the episode");
}

void require_index(const EpisodeTrace& trace, std::size_t t) {
  if (t >= trace.size()) throw std::out_of_range("tick outside trace");
}

}  // namespace

std::string_view mode_name(VeeMode mode) {
  switch (mode) {
    case VeeMode::Instantaneous: return "instantaneous";
    case VeeMode::SuffixSum: return "suffix-sum";
    case VeeMode::Cumulative: return "cumulative";
  }
  return "";
}

std::optional<VeeMode> parse_mode(std::string_view name) {
  for (VeeMode m : {VeeMode::Instantaneous, VeeMode::SuffixSum, VeeMode::Cumulative})
    if (mode_name(m) == name) return m;
  return std::nullopt;
}

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.empty()) throw std::invalid_argument("embedding set must have at least one row");
  if (data_.size() % dim_ != 0) throw std::invalid_argument("embedding data is not a whole number of rows");
  for (double v : data_)
    if (!std::isfinite(v)) throw std::invalid_argument("embedding set contains a non-finite entry");
}

void EmbeddingSet::add_row(std::span<const double> values) {
  if (dim_ == 0) dim_ = values.size();
  if (values.size() != dim_ || dim_ == 0) throw std::invalid_argument("embedding dimension mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("embedding row contains a non-finite entry");
  data_.insert(data_.end(), values.begin(), values.end());
}

double realized_return(const EpisodeTrace& trace, std::size_t t) {
  require_complete(trace);
  require_index(trace, t);
  double total = 0.0;
  double discount = 1.0;
  for (std::size_t k = t; k < trace.size(); ++k) {
    total += discount * trace.records[k].reward;
    discount *= trace.gamma;
  }
  return total;
}

std::vector<double> realized_returns(const EpisodeTrace& trace) {
  require_complete(trace);
  std::vector<double> out(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) out[t] = realized_return(trace, t);
  return out;
}

double vee_instant(const EpisodeTrace& trace, std::size_t t) {
  return std::abs(trace.records.at(t).q_value - realized_return(trace, t));
}

double vee_suffix(const EpisodeTrace& trace, std::size_t n) {
  require_complete(trace);
  require_index(trace, n);
  // Accumulate from the end so vee_suffix(N) == vee_instant(N) + vee_suffix(N+1) exactly.
  double acc = 0.0;
  for (std::size_t t = trace.size(); t-- > n;) acc += vee_instant(trace, t);
  return acc;
}

double vee_cumulative(const EpisodeTrace& trace, std::size_t n) {
  require_index(trace, n);
  // partial(t, N) = r_t + gamma * partial(t+1, N), built backwards from N.
  double partial = 0.0;
  double acc = 0.0;
  for (std::size_t t = n + 1; t-- > 0;) {
    partial = trace.records[t].reward + trace.gamma * partial;
    acc += std::abs(trace.records[t].q_value - partial);
  }
  return acc;
}

double dnts(std::span<const double> embedding, const EmbeddingSet& set, Execution exec) {
  if (set.rows() == 0) throw std::invalid_argument("embedding set is empty");
  if (embedding.size() != set.dim()) throw std::invalid_argument("embedding dimension mismatch");
  return exec == Execution::Serial ? kernels::serial::nearest(set.data(), set.dim(), embedding).squared_distance
                                   : kernels::parallel::nearest(set.data(), set.dim(), embedding).squared_distance;
}

std::vector<TrustPoint> trace_curve(const EpisodeTrace& trace, const EmbeddingSet& set, VeeMode mode,
                                    Execution exec) {
  if (mode != VeeMode::Cumulative) require_complete(trace);
  if (set.rows() == 0) throw std::invalid_argument("embedding set is empty");
  std::vector<double> queries;
  queries.reserve(trace.size() * set.dim());
  for (const auto& r : trace.records) {
    if (r.embedding.size() != set.dim()) throw std::invalid_argument("embedding dimension mismatch");
    queries.insert(queries.end(), r.embedding.begin(), r.embedding.end());
  }
  const auto distances = trace.size() == 0 ? std::vector<double>{}
                         : exec == Execution::Serial
                             ? kernels::serial::nearest_distances(set.data(), set.dim(), queries)
                             : kernels::parallel::nearest_distances(set.data(), set.dim(), queries);

  std::vector<double> vee(trace.size());
  switch (mode) {
    case VeeMode::Instantaneous: {
      const auto returns = realized_returns(trace);
      for (std::size_t t = 0; t < trace.size(); ++t) vee[t] = std::abs(trace.records[t].q_value - returns[t]);
      break;
    }
    case VeeMode::SuffixSum: {
      const auto returns = realized_returns(trace);
      double acc = 0.0;
      for (std::size_t t = trace.size(); t-- > 0;) {
        acc += std::abs(trace.records[t].q_value - returns[t]);
        vee[t] = acc;
      }
      break;
    }
    case VeeMode::Cumulative:
      for (std::size_t t = 0; t < trace.size(); ++t) vee[t] = vee_cumulative(trace, t);
      break;
  }

  std::vector<TrustPoint> points(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) points[t] = {trace.records[t].t, vee[t], distances[t], mode};
  return points;
}

json to_json(const TrustPoint& p) {
  return {{"t", p.t}, {"vee", p.vee}, {"dnts", p.dnts}, {"mode", mode_name(p.mode)}};
}

void write_trace_jsonl(std::ostream& out, const EpisodeTrace& trace, const std::vector<TrustPoint>& points,
                       const std::string& agent_id) {
  if (points.size() != trace.size()) throw std::invalid_argument("one trust point per tick is required");
  const VeeMode mode = points.empty() ? VeeMode::Instantaneous : points.front().mode;
  out << json{{"kind", "header"},
              {"schema_version", kTraceSchemaVersion},
              {"gamma", trace.gamma},
              {"mode", mode_name(mode)},
              {"agent_id", agent_id},
              {"ticks", trace.size()},
              {"complete", trace.complete}}
             .dump()
      << '\n';
  const auto returns = trace.complete ? realized_returns(trace) : std::vector<double>{};
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& r = trace.records[t];
    json row{{"kind", "tick"},
             {"t", r.t},
             {"action", game::action_name(r.action)},
             {"reward", r.reward},
             {"q_value", r.q_value},
             {"realized_return", trace.complete ? json(returns[t]) : json(nullptr)},
             {"vee", points[t].vee},
             {"dnts", points[t].dnts},
             {"score", r.state.score},
             {"lives", r.state.lives},
             {"player", {r.state.player.x, r.state.player.y}},
             {"state_hash", r.state.hash()}};
    out << row.dump() << '\n';
  }
}

TraceFile read_trace_jsonl(std::istream& in) {
  TraceFile file;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty trace file");
  const json h = json::parse(line);
  if (h.at("kind") != "header") throw std::invalid_argument("trace file must start with a header line");
  file.header.schema_version = h.at("schema_version").get<int>();
  if (file.header.schema_version != kTraceSchemaVersion) throw std::invalid_argument("unsupported trace schema");
  file.header.gamma = h.at("gamma").get<double>();
  const auto mode = parse_mode(h.at("mode").get<std::string>());
  if (!mode) throw std::invalid_argument("unknown VEE mode in trace header");
  file.header.mode = *mode;
  file.header.agent_id = h.at("agent_id").get<std::string>();
  file.header.ticks = h.at("ticks").get<std::size_t>();
  file.header.complete = h.at("complete").get<bool>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    TraceFileRow row;
    row.t = j.at("t").get<int>();
    row.action = j.at("action").get<std::string>();
    row.reward = j.at("reward").get<double>();
    row.q_value = j.at("q_value").get<double>();
    if (!j.at("realized_return").is_null()) row.realized_return = j.at("realized_return").get<double>();
    row.vee = j.at("vee").get<double>();
    row.dnts = j.at("dnts").get<double>();
    row.score = j.at("score").get<std::int64_t>();
    row.lives = j.at("lives").get<int>();
    file.rows.push_back(std::move(row));
  }
  return file;
}

}  // namespace qtrust::metrics
