#include "dqlens/defect_lab.hpp"
#include "dqlens/filter.hpp"
#include "dqlens/frame.hpp"
#include "dqlens/relation.hpp"

#include <benchmark/benchmark.h>

#include <map>

namespace {

using namespace dqlens;

// Generated once per size and reused across benchmarks.
const std::string& fixture_text(std::size_t n) {
  static std::map<std::size_t, std::string> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto rel = generate_base(SchemaSpec::employees(7), n);
    it = cache.emplace(n, serialize_delimited(*rel, rel->options())).first;
  }
  return it->second;
}

RelationPtr fixture(std::size_t n) { return load_relation(fixture_text(n), "emp", {}); }

void BM_Load(benchmark::State& state) {
  const auto& text = fixture_text(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(load_relation(text, "emp", {}));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Load)->Arg(10000)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_Filter(benchmark::State& state) {
  auto rel = fixture(static_cast<std::size_t>(state.range(0)));
  FilterSpec f{{KeywordSet{"position", {"manager", "clerk"}}, Range{"age", 30, 50}}};
  for (auto _ : state) benchmark::DoNotOptimize(apply_filter(*rel, f));
}
BENCHMARK(BM_Filter)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_HeatMap(benchmark::State& state) {
  auto rel = fixture(static_cast<std::size_t>(state.range(0)));
  SceneSpec s;
  s.relation = "emp";
  s.technique = Technique::HeatMap;
  s.target_attrs = {"age", "salary"};
  s.bins = 50;
  for (auto _ : state) benchmark::DoNotOptimize(frame_json_text(prep_frame(*rel, nullptr, s)));
}
BENCHMARK(BM_HeatMap)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_CompactedParallel(benchmark::State& state) {
  auto rel = fixture(static_cast<std::size_t>(state.range(0)));
  SceneSpec s;
  s.relation = "emp";
  s.technique = Technique::ParallelCoordinates;
  s.target_attrs = {"position", "salary", "age", "years"};
  s.compaction = true;
  for (auto _ : state) benchmark::DoNotOptimize(frame_json_text(prep_frame(*rel, nullptr, s)));
}
BENCHMARK(BM_CompactedParallel)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_TablePlot(benchmark::State& state) {
  auto rel = fixture(static_cast<std::size_t>(state.range(0)));
  SceneSpec s;
  s.relation = "emp";
  s.technique = Technique::TablePlot;
  s.target_attrs = {"salary", "age", "position"};
  s.ordering = Ordering{"salary"};
  s.row_bins = 100;
  for (auto _ : state) benchmark::DoNotOptimize(frame_json_text(prep_frame(*rel, nullptr, s)));
}
BENCHMARK(BM_TablePlot)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
