// Writes the random-MDP fixtures used by `csac oracle-check`.
//
//   make_fixtures <dir> [count] [first_seed]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "csac/oracle.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <dir> [count] [first_seed]\n", argv[0]);
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  const int count = argc > 2 ? std::atoi(argv[2]) : 8;
  const unsigned long long first = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1000;
  std::filesystem::create_directories(dir);
  for (int k = 0; k < count; ++k) {
    const auto seed = first + static_cast<unsigned long long>(k);
    // sizes cycle through 2..10 states and 2..5 actions
    const std::size_t s = 2 + static_cast<std::size_t>(k * 3) % 9;
    const std::size_t a = 2 + static_cast<std::size_t>(k) % 4;
    const auto mdp = csac::oracle::random_mdp(s, a, 0.9, seed);
    char name[64];
    std::snprintf(name, sizeof name, "random_%02d.mdp", k);
    csac::oracle::write_fixture(dir / name, mdp,
                                "random_mdp(" + std::to_string(s) + ", " + std::to_string(a) +
                                    ", gamma 0.9, seed " + std::to_string(seed) + ")");
    std::printf("%s\n", (dir / name).string().c_str());
  }
  return 0;
}
