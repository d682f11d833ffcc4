// Acceptance gate: runs every experiment card with a pinned seed and prints
// one PASS/FAIL line per card. Exits nonzero if any card fails. Evidence CSVs
// are written to acceptance-evidence/ in the working directory so every
// number in the output can be audited after the fact.

#include <cstdio>
#include <string>

#include <permapprox/bench.hpp>

int main() {
  permapprox::BenchContext ctx;
  ctx.seed = 42;
  ctx.out_dir = "acceptance-evidence";

  const auto& cards = permapprox::bench_cards();
  const int total = static_cast<int>(cards.size());
  int passed = 0;
  for (int i = 0; i < total; ++i) {
    const permapprox::CardResult result = permapprox::run_bench_card(cards[static_cast<std::size_t>(i)], ctx);
    if (result.pass) ++passed;
    std::printf("[%d/%d] %s %s: %s\n", i + 1, total, result.pass ? "PASS" : "FAIL",
                result.name.c_str(), result.detail.c_str());
    for (const std::string& path : result.evidence)
      std::printf("        evidence: %s\n", path.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", passed, total);
  return passed == total ? 0 : 1;
}
