// Final fidelity of each standard gate for both parameter presets, with
// equal monitoring steps. Usage: gate_table [t_mon_us]

#include "mechcluster/optomech.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  using namespace mechcluster::optomech;
  const double t_mon = (argc > 1 ? std::atof(argv[1]) : 100.0) * 1e-6;
  if (!(t_mon > 0.0)) {
    std::fprintf(stderr, "usage: gate_table [t_mon_us > 0]\n");
    return 2;
  }
  const auto gates = standard_gates();
  std::printf("%-6s %10s %10s\n", "gate", "set1", "set2");
  const auto a = gate_comparison(PhysicalParams::set1(), gates, MonitoringSchedule::equal(4, t_mon));
  const auto b = gate_comparison(PhysicalParams::set2(), gates, MonitoringSchedule::equal(4, t_mon));
  for (std::size_t i = 0; i < gates.size(); ++i) {
    std::printf("%-6s %10.6f %10.6f\n", a[i].name.c_str(), a[i].result.final_fidelity(), b[i].result.final_fidelity());
  }
}
