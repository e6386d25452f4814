#include <benchmark/benchmark.h>

#include <random>

#include "cellmetry/tiff.hpp"

namespace {

void BM_TiffDecode(benchmark::State& state) {
    cellmetry::TiffStack stack;
    stack.width = 512;
    stack.height = 512;
    stack.pages = 64;
    stack.bits_per_sample = static_cast<int>(state.range(0));
    stack.samples.resize(stack.width * stack.height * stack.pages);
    std::mt19937 rng(1);
    for (auto& v : stack.samples) v = static_cast<std::uint16_t>(rng() % (stack.bits_per_sample == 8 ? 256 : 65536));
    const auto order = state.range(1) ? cellmetry::ByteOrder::big : cellmetry::ByteOrder::little;
    const auto bytes = cellmetry::encode_tiff(stack, order);
    for (auto _ : state) benchmark::DoNotOptimize(cellmetry::decode_tiff(bytes));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_TiffDecode)
    ->ArgsProduct({{8, 16}, {0, 1}})
    ->ArgNames({"bits", "big_endian"})
    ->Unit(benchmark::kMillisecond);

}  // namespace
