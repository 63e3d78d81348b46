// Emits the cross-platform test vectors for the counter-based streams.
#include <cstdio>
#include <iostream>

#include "json.hpp"
#include "mvlab/rng.hpp"

int main() {
  using namespace mvlab;
  const StreamKey keys[] = {
      {0, 0, 0, 0, 0},
      {42, lane_id("simulate"), 0, 0, 0},
      {42, lane_id("simulate"), 1, 17, 1000},
      {0xDEADBEEFCAFEull, lane_id("picard"), 3, 1023, 4095},
  };
  nlohmann::json doc;
  doc["generator"] = "philox4x32-10 + box-muller";
  for (const auto& k : keys) {
    nlohmann::json e;
    e["master_seed"] = k.master_seed;
    e["experiment"] = k.experiment;
    e["replicate"] = k.replicate;
    e["particle"] = k.particle;
    e["step"] = k.step;
    CounterStream s(k);
    for (int i = 0; i < 8; ++i) e["u32"].push_back(s.next_u32());
    for (double z : normal_draws(k, 8)) e["normals"].push_back(z);
    doc["vectors"].push_back(e);
  }
  std::cout << doc.dump(2) << "\n";
}
