#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "softq/plant.hpp"

namespace softq {

struct Transition {
  RobotState s;
  Action a;
  RobotState s_next;
  bool operator==(const Transition& o) const { return s == o.s && a == o.a && s_next == o.s_next; }
};

enum class SourceTag { random_walk, expert };

inline const char* to_string(SourceTag t) { return t == SourceTag::expert ? "expert" : "random"; }
inline SourceTag source_tag_from_string(const std::string& s) {
  if (s == "expert") return SourceTag::expert;
  if (s == "random") return SourceTag::random_walk;
  throw std::runtime_error("unknown source tag: " + s);
}

struct TrajectorySequence {
  std::vector<Transition> steps;
  std::uint64_t seed = 0;
  SourceTag source = SourceTag::random_walk;
};

// Per-dimension min/max/mean over all states (initial + successors) and
// actions of a dataset.  Zero-range dimensions normalize to 0.
struct NormalizationStats {
  std::array<double, 10> state_min{}, state_max{}, state_mean{};
  std::array<double, 4> action_min{}, action_max{}, action_mean{};

  static NormalizationStats compute(const std::vector<TrajectorySequence>& sequences) {
    NormalizationStats st;
    st.state_min.fill(0.0);
    st.state_max.fill(0.0);
    st.state_mean.fill(0.0);
    st.action_min.fill(0.0);
    st.action_max.fill(0.0);
    st.action_mean.fill(0.0);
    long n_states = 0, n_actions = 0;
    bool first_state = true, first_action = true;
    auto eat_state = [&](const RobotState& s) {
      auto a = s.to_array();
      for (int d = 0; d < 10; ++d) {
        if (first_state) {
          st.state_min[d] = st.state_max[d] = a[d];
        } else {
          st.state_min[d] = std::min(st.state_min[d], a[d]);
          st.state_max[d] = std::max(st.state_max[d], a[d]);
        }
        st.state_mean[d] += a[d];
      }
      first_state = false;
      ++n_states;
    };
    for (const auto& seq : sequences) {
      for (std::size_t k = 0; k < seq.steps.size(); ++k) {
        if (k == 0) eat_state(seq.steps[k].s);
        eat_state(seq.steps[k].s_next);
        for (int d = 0; d < 4; ++d) {
          double x = seq.steps[k].a.v[d];
          if (first_action) {
            st.action_min[d] = st.action_max[d] = x;
          } else {
            st.action_min[d] = std::min(st.action_min[d], x);
            st.action_max[d] = std::max(st.action_max[d], x);
          }
          st.action_mean[d] += x;
        }
        first_action = false;
        ++n_actions;
      }
    }
    if (n_states == 0) throw std::invalid_argument("cannot compute normalization stats of an empty dataset");
    for (int d = 0; d < 10; ++d) st.state_mean[d] /= static_cast<double>(n_states);
    for (int d = 0; d < 4; ++d) st.action_mean[d] /= static_cast<double>(n_actions);
    return st;
  }

  static double norm1(double x, double lo, double hi) {
    const double r = hi - lo;
    return r > 0.0 ? (x - lo) / r : 0.0;
  }
  static double denorm1(double y, double lo, double hi) {
    const double r = hi - lo;
    return r > 0.0 ? lo + y * r : lo;
  }

  std::array<double, 10> normalize_state(const RobotState& s) const {
    auto a = s.to_array();
    std::array<double, 10> out;
    for (int d = 0; d < 10; ++d) out[d] = norm1(a[d], state_min[d], state_max[d]);
    return out;
  }
  RobotState denormalize_state(const std::array<double, 10>& y) const {
    std::array<double, 10> a;
    for (int d = 0; d < 10; ++d) a[d] = denorm1(y[d], state_min[d], state_max[d]);
    return RobotState::from_array(a);
  }
  std::array<double, 4> normalize_action(const Action& a) const {
    std::array<double, 4> out;
    for (int d = 0; d < 4; ++d) out[d] = norm1(a.v[d], action_min[d], action_max[d]);
    return out;
  }

  bool operator==(const NormalizationStats& o) const {
    return state_min == o.state_min && state_max == o.state_max && state_mean == o.state_mean &&
           action_min == o.action_min && action_max == o.action_max && action_mean == o.action_mean;
  }
};

struct Dataset {
  std::vector<TrajectorySequence> sequences;
  NormalizationStats stats;

  std::size_t size() const { return sequences.size(); }
  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.steps.size();
    return n;
  }
  std::size_t expert_count() const {
    return static_cast<std::size_t>(
        std::count_if(sequences.begin(), sequences.end(),
                      [](const TrajectorySequence& s) { return s.source == SourceTag::expert; }));
  }
  bool operator==(const Dataset& o) const {
    if (sequences.size() != o.sequences.size() || !(stats == o.stats)) return false;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      if (sequences[i].seed != o.sequences[i].seed || sequences[i].source != o.sequences[i].source ||
          !(sequences[i].steps == o.sequences[i].steps))
        return false;
    }
    return true;
  }
};

struct CollectOptions {
  int n_sequences = 250;
  int steps_per_sequence = 100;
  double expert_fraction = 0.02;
  double ou_time_constant = 0.2;  // s
  double ou_sigma = 1.2;          // action units / sqrt(s)
  double ou_mean = 0.5;
  GaitWaveSpec gait{};
};

// Collects transition sequences from the plant with sensor noise disabled
// (the dataset captures the clean model; noise is a training-time injection).
// Deterministic and order-stable: sequence i always uses derive_seed(seed, i).
inline Dataset collect(const PlantConfig& plant_config, const CollectOptions& opt, std::uint64_t seed) {
  if (opt.n_sequences <= 0 || opt.steps_per_sequence <= 0)
    throw std::invalid_argument("collect: sequence counts must be positive");
  if (opt.expert_fraction < 0.0 || opt.expert_fraction > 1.0)
    throw std::invalid_argument("collect: expert_fraction must lie in [0,1]");

  PlantConfig cfg = plant_config;
  cfg.noise_var_v = cfg.noise_var_theta = cfg.noise_var_fn = 0.0;
  cfg.compute_delay = 0.0;

  const int n_expert = static_cast<int>(std::ceil(opt.expert_fraction * opt.n_sequences));
  Dataset out;
  out.sequences.reserve(opt.n_sequences);

  for (int i = 0; i < opt.n_sequences; ++i) {
    TrajectorySequence seq;
    seq.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    seq.source = (i < n_expert) ? SourceTag::expert : SourceTag::random_walk;
    seq.steps.reserve(opt.steps_per_sequence);

    ReferencePlant plant(cfg);
    RobotState s = plant.reset(seq.seed);

    std::mt19937_64 rng(derive_seed(seq.seed, 0x0cea11));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<double, 4> ou;
    for (auto& x : ou) x = uni(rng);
    const double ts = cfg.sample_time;
    const double pull = std::min(1.0, ts / opt.ou_time_constant);
    const double diff = opt.ou_sigma * std::sqrt(ts);

    for (int k = 0; k < opt.steps_per_sequence; ++k) {
      Action a;
      if (seq.source == SourceTag::expert) {
        a = expert_gait(k * ts, opt.gait, cfg.limits);
      } else {
        for (int d = 0; d < 4; ++d) {
          ou[d] += pull * (opt.ou_mean - ou[d]) + diff * gauss(rng);
          ou[d] = clamp01(ou[d]);
        }
        a = Action(ou);
      }
      StepOutcome o = plant.step(a);
      seq.steps.push_back(Transition{s, a, o.next_state});
      s = o.next_state;
      if (o.fallen) break;  // random excitation can tip the plant over
    }
    out.sequences.push_back(std::move(seq));
  }
  out.stats = NormalizationStats::compute(out.sequences);
  return out;
}

// Sequence-granular split.  Every expert sequence lands in the validation
// split; the remainder of the validation quota is sampled from the random
// sequences with the given seed.  Stats are computed from the training split
// only and shared with the validation split.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double val_ratio, std::uint64_t seed) {
  const std::size_t n = data.sequences.size();
  if (n < 2) throw std::invalid_argument("split: need at least two sequences");
  if (!(val_ratio > 0.0 && val_ratio < 1.0))
    throw std::invalid_argument("split: val_ratio must lie in (0,1)");
  std::size_t val_n = static_cast<std::size_t>(std::lround(val_ratio * static_cast<double>(n)));
  if (val_n == 0 || val_n >= n)
    throw std::invalid_argument("split: val_ratio leaves an empty split");

  std::vector<std::size_t> expert_idx, random_idx;
  for (std::size_t i = 0; i < n; ++i)
    (data.sequences[i].source == SourceTag::expert ? expert_idx : random_idx).push_back(i);
  if (val_n < expert_idx.size()) val_n = expert_idx.size();
  if (val_n >= n) throw std::invalid_argument("split: expert sequences alone exceed the training quota");

  std::vector<std::size_t> pool = random_idx;
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::size_t> val_idx = expert_idx;
  for (std::size_t i = 0; i < val_n - expert_idx.size(); ++i) val_idx.push_back(pool[i]);
  std::sort(val_idx.begin(), val_idx.end());

  std::vector<bool> in_val(n, false);
  for (auto i : val_idx) in_val[i] = true;

  Dataset train, val;
  for (std::size_t i = 0; i < n; ++i)
    (in_val[i] ? val : train).sequences.push_back(data.sequences[i]);
  train.stats = NormalizationStats::compute(train.sequences);
  val.stats = train.stats;
  return {std::move(train), std::move(val)};
}

inline void save(const Dataset& data, const std::string& path) {
  auto f = open_out(path);
  f << "seq_id,step";
  for (int d = 0; d < 10; ++d) f << ",s" << d;
  for (int d = 0; d < 4; ++d) f << ",a" << d;
  for (int d = 0; d < 10; ++d) f << ",s_next" << d;
  f << ",source_tag\n";
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const auto& seq = data.sequences[i];
    for (std::size_t k = 0; k < seq.steps.size(); ++k) {
      const auto& tr = seq.steps[k];
      f << i << ',' << k;
      for (double x : tr.s.to_array()) f << ',' << format_double(x);
      for (double x : tr.a.v) f << ',' << format_double(x);
      for (double x : tr.s_next.to_array()) f << ',' << format_double(x);
      f << ',' << to_string(seq.source) << '\n';
    }
  }
  f.close();

  nlohmann::json j;
  auto dump = [](const auto& arr) { return std::vector<double>(arr.begin(), arr.end()); };
  j["state_min"] = dump(data.stats.state_min);
  j["state_max"] = dump(data.stats.state_max);
  j["state_mean"] = dump(data.stats.state_mean);
  j["action_min"] = dump(data.stats.action_min);
  j["action_max"] = dump(data.stats.action_max);
  j["action_mean"] = dump(data.stats.action_mean);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : data.sequences) seeds.push_back(s.seed);
  j["sequence_seeds"] = seeds;
  auto sf = open_out(path + ".stats.json");
  sf << j.dump(2) << '\n';
}

inline Dataset load(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty dataset file");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() != 27 || header[0] != "seq_id" || header[26] != "source_tag")
    throw std::runtime_error(path + ":1: unexpected dataset header");

  Dataset out;
  long cur_seq = -1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 27)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 27 fields, got " +
                               std::to_string(fields.size()));
    const long seq_id = static_cast<long>(parse_double_field(fields[0], path, line_no));
    Transition tr;
    std::array<double, 10> s{}, sn{};
    std::array<double, 4> a{};
    for (int d = 0; d < 10; ++d) s[d] = parse_double_field(fields[2 + d], path, line_no);
    for (int d = 0; d < 4; ++d) a[d] = parse_double_field(fields[12 + d], path, line_no);
    for (int d = 0; d < 10; ++d) sn[d] = parse_double_field(fields[16 + d], path, line_no);
    tr.s = RobotState::from_array(s);
    tr.a = Action(a);
    tr.s_next = RobotState::from_array(sn);
    const SourceTag tag = source_tag_from_string(fields[26]);
    if (seq_id != cur_seq) {
      if (seq_id != cur_seq + 1)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-contiguous seq_id");
      out.sequences.push_back(TrajectorySequence{{}, 0, tag});
      cur_seq = seq_id;
    }
    if (out.sequences.back().source != tag)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": source_tag changes mid-sequence");
    out.sequences.back().steps.push_back(std::move(tr));
  }
  if (out.sequences.empty()) throw std::runtime_error(path + ": empty dataset file");

  std::ifstream sf(path + ".stats.json");
  if (sf) {
    nlohmann::json j;
    sf >> j;
    auto fill = [&](const char* key, auto& arr) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != arr.size()) throw std::runtime_error(path + ".stats.json: bad length for " + std::string(key));
      std::copy(v.begin(), v.end(), arr.begin());
    };
    fill("state_min", out.stats.state_min);
    fill("state_max", out.stats.state_max);
    fill("state_mean", out.stats.state_mean);
    fill("action_min", out.stats.action_min);
    fill("action_max", out.stats.action_max);
    fill("action_mean", out.stats.action_mean);
    const auto seeds = j.at("sequence_seeds").get<std::vector<std::uint64_t>>();
    for (std::size_t i = 0; i < out.sequences.size() && i < seeds.size(); ++i)
      out.sequences[i].seed = seeds[i];
  } else {
    out.stats = NormalizationStats::compute(out.sequences);
  }
  return out;
}

}  // namespace softq
