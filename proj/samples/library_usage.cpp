// Simulate a panel with known effects, estimate them and print both.

#include <cstdio>

#include "dosedid/bootstrap.hpp"
#include "dosedid/simlab.hpp"

int main() {
  using namespace dosedid;
  sim::DgpSpec spec;
  spec.seed = 42;
  const auto sim = sim::generate(spec);

  EstimationConfig cfg;
  BootstrapOptions boot;
  boot.replicates = 100;
  boot.seed = 7;
  const auto fit = bootstrap_analysis(sim.panel, DriverKind::Competition, cfg, boot);
  const auto& e = fit.estimates;
  const auto& t = sim.truth;

  std::printf("window %d..%d\n", e.window_first, e.window_last);
  std::printf("ATT    %8.3f (se %.3f)   truth %8.3f\n", e.att, e.att_se, t.window_att(e.window_first, e.window_last));
  std::printf("ADUTT  %8.3f (se %.3f)   truth %8.3f\n", e.adutt, e.adutt_se,
              t.window_adutt(e.window_first, e.window_last));
  if (e.reda)
    std::printf("REDA   %8.3f (se %.3f)   truth %8.3f\n", *e.reda, e.reda_se,
                t.window_reda(e.window_first, e.window_last));
  std::printf("\n%10s %10s %10s %10s\n", "dose", "adt", "se", "truth");
  for (Eigen::Index g = 0; g < e.curve.values.size(); g += 11) {
    const double d = e.curve.points(g, 0);
    std::printf("%10.3f %10.3f %10.3f %10.3f\n", d, e.curve.values(g), e.curve.se(g),
                t.window_adt(d, e.window_first, e.window_last));
  }
  return 0;
}
