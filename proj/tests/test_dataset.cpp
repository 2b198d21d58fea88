#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "softq/dataset.hpp"

using namespace softq;

namespace {

CollectOptions small_opts() {
  CollectOptions o;
  o.n_sequences = 24;
  o.steps_per_sequence = 30;
  o.expert_fraction = 0.2;  // 5 expert sequences
  return o;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* name) : path(std::filesystem::path("test_tmp") / name) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const char* base) const { return (path / base).string(); }
};

}  // namespace

TEST_CASE("collect is deterministic and honors the requested shape") {
  PlantConfig cfg;
  const Dataset a = collect(cfg, small_opts(), 11);
  const Dataset b = collect(cfg, small_opts(), 11);
  CHECK(a == b);
  CHECK(a.size() == 24);
  CHECK(a.expert_count() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.sequences[i].seed == derive_seed(11, i));
    CHECK(a.sequences[i].steps.size() <= 30);
    CHECK(!a.sequences[i].steps.empty());
  }
  const Dataset c = collect(cfg, small_opts(), 12);
  CHECK_FALSE(a == c);
}

TEST_CASE("expert head count rounds up") {
  PlantConfig cfg;
  CollectOptions o;
  o.n_sequences = 250;
  o.steps_per_sequence = 2;
  o.expert_fraction = 0.02;
  const Dataset d = collect(cfg, o, 0);
  CHECK(d.expert_count() == 5);
  // Expert sequences come first.
  for (int i = 0; i < 5; ++i) CHECK(d.sequences[static_cast<std::size_t>(i)].source == SourceTag::expert);
  CHECK(d.sequences[5].source == SourceTag::random_walk);
}

TEST_CASE("expert sequences replay the reference gait identically") {
  PlantConfig cfg;
  const CollectOptions o = small_opts();
  const Dataset d = collect(cfg, o, 3);
  const auto& e0 = d.sequences[0];
  REQUIRE(e0.source == SourceTag::expert);
  REQUIRE(e0.steps.size() == 30);
  for (std::size_t k = 0; k < e0.steps.size(); ++k) {
    const Action want = expert_gait(static_cast<double>(k) * cfg.sample_time, o.gait, cfg.limits);
    CHECK(e0.steps[k].a == want);
  }
  // All expert replicas see the same noise-free plant, so they are identical.
  CHECK(d.sequences[1].steps == e0.steps);
}

TEST_CASE("sequences chain: each successor state is the next initial state") {
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 5);
  for (const auto& seq : d.sequences) {
    for (std::size_t k = 0; k + 1 < seq.steps.size(); ++k)
      CHECK(seq.steps[k].s_next == seq.steps[k + 1].s);
    for (const auto& tr : seq.steps)
      for (int j = 0; j < 4; ++j) {
        CHECK(tr.a.v[j] >= 0.0);
        CHECK(tr.a.v[j] <= 1.0);
      }
  }
}

TEST_CASE("random excitation actually varies") {
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 5);
  const auto& r = d.sequences.back();
  REQUIRE(r.source == SourceTag::random_walk);
  bool varies = false;
  for (std::size_t k = 1; k < r.steps.size(); ++k)
    if (!(r.steps[k].a == r.steps[0].a)) varies = true;
  CHECK(varies);
}

TEST_CASE("collect rejects degenerate shapes") {
  PlantConfig cfg;
  CollectOptions o = small_opts();
  o.n_sequences = 0;
  CHECK_THROWS_AS(collect(cfg, o, 0), std::invalid_argument);
  o = small_opts();
  o.expert_fraction = 1.5;
  CHECK_THROWS_AS(collect(cfg, o, 0), std::invalid_argument);
}

TEST_CASE("normalization stats bound the data and map it into the unit box") {
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 9);
  for (int dim = 0; dim < 10; ++dim) {
    CHECK(d.stats.state_min[dim] <= d.stats.state_mean[dim]);
    CHECK(d.stats.state_mean[dim] <= d.stats.state_max[dim]);
  }
  for (const auto& seq : d.sequences)
    for (const auto& tr : seq.steps) {
      for (double x : d.stats.normalize_state(tr.s)) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
      for (double x : d.stats.normalize_state(tr.s_next)) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
      for (double x : d.stats.normalize_action(tr.a)) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
    }
}

TEST_CASE("zero-range dimensions normalize to zero and invert to the bound") {
  CHECK(NormalizationStats::norm1(5.0, 5.0, 5.0) == 0.0);
  CHECK(NormalizationStats::denorm1(0.7, 5.0, 5.0) == 5.0);
  CHECK(NormalizationStats::norm1(2.0, 1.0, 3.0) == 0.5);
  CHECK(NormalizationStats::denorm1(0.5, 1.0, 3.0) == 2.0);
}

TEST_CASE("round trip through normalize and denormalize recovers states") {
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 2);
  const RobotState& s = d.sequences[7].steps[3].s;
  const RobotState back = d.stats.denormalize_state(d.stats.normalize_state(s));
  const auto a = s.to_array(), b = back.to_array();
  for (int dim = 0; dim < 10; ++dim) CHECK(b[dim] == Catch::Approx(a[dim]).margin(1e-12));
}

TEST_CASE("split keeps experts in validation and recomputes train stats") {
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 21);
  const auto [train, val] = split(d, 0.25, 77);
  CHECK(train.size() + val.size() == d.size());
  CHECK(val.size() == 6);  // 5 experts + 1 sampled random sequence
  CHECK(val.expert_count() == 5);
  CHECK(train.expert_count() == 0);
  CHECK(val.stats == train.stats);
  CHECK_FALSE(train.stats == d.stats);  // experts are excluded from train

  // Deterministic given the seed.
  const auto [train2, val2] = split(d, 0.25, 77);
  CHECK(train2 == train);
  CHECK(val2 == val);

  // Union preserved: every original sequence appears exactly once.
  std::size_t matched = 0;
  for (const auto& seq : d.sequences) {
    for (const auto& t : train.sequences)
      if (t.seed == seq.seed && t.steps == seq.steps) ++matched;
    for (const auto& v : val.sequences)
      if (v.seed == seq.seed && v.steps == seq.steps) ++matched;
  }
  CHECK(matched == d.size());
}

TEST_CASE("split rejects ratios that empty a side") {
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 21);
  CHECK_THROWS_AS(split(d, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(d, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(d, 0.999, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(d, 0.001, 0), std::invalid_argument);  // rounds to zero val unless experts exist
}

TEST_CASE("dataset round trips through CSV byte-exactly") {
  TempDir tmp("dataset_roundtrip");
  PlantConfig cfg;
  const Dataset d = collect(cfg, small_opts(), 31);
  const std::string path = tmp.file("data.csv");
  save(d, path);
  const Dataset back = load(path);
  CHECK(back == d);
}

TEST_CASE("load reports malformed rows with their line number") {
  TempDir tmp("dataset_malformed");
  PlantConfig cfg;
  CollectOptions o = small_opts();
  o.n_sequences = 2;
  o.steps_per_sequence = 3;
  o.expert_fraction = 0.0;
  const Dataset d = collect(cfg, o, 1);
  const std::string path = tmp.file("data.csv");
  save(d, path);

  // Truncate one row: drop the final field of line 3.
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  lines[2] = lines[2].substr(0, lines[2].rfind(','));
  std::ofstream outf(path, std::ios::trunc);
  for (const auto& l : lines) outf << l << '\n';
  outf.close();
  CHECK_THROWS_WITH(load(path), Catch::Matchers::ContainsSubstring(":3:"));
}

TEST_CASE("load rejects empty and headerless files") {
  TempDir tmp("dataset_empty");
  const std::string path = tmp.file("empty.csv");
  std::ofstream(path).close();
  CHECK_THROWS_WITH(load(path), Catch::Matchers::ContainsSubstring("empty"));

  const std::string bad = tmp.file("bad.csv");
  std::ofstream b(bad);
  b << "not,a,dataset\n";
  b.close();
  CHECK_THROWS_WITH(load(bad), Catch::Matchers::ContainsSubstring("header"));
}

TEST_CASE("load without the stats sidecar recomputes statistics") {
  TempDir tmp("dataset_nosidecar");
  PlantConfig cfg;
  CollectOptions o = small_opts();
  o.expert_fraction = 0.0;
  const Dataset d = collect(cfg, o, 13);
  const std::string path = tmp.file("data.csv");
  save(d, path);
  std::filesystem::remove(path + ".stats.json");
  const Dataset back = load(path);
  CHECK(back.stats == NormalizationStats::compute(back.sequences));
  CHECK(back.stats == d.stats);  // full-set stats coincide with recomputation
}
