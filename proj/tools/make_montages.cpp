// Regenerates the shipped montage files: make_montages <dir>
#include <cstdio>
#include <filesystem>

#include "kappa/error.hpp"
#include "kappa/synth/synth.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_montages <dir>\n");
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  try {
    std::filesystem::create_directories(dir);
    for (std::size_t n : {8, 16, 32, 71}) {
      const kappa::synth::Montage m{kappa::synth::default_labels(n), kappa::synth::fibonacci_montage(n)};
      kappa::synth::save_montage(m, dir / ("montage_" + std::to_string(n) + ".json"));
    }
  } catch (const kappa::Error& e) {
    std::fprintf(stderr, "make_montages: %s\n", e.what());
    return 1;
  }
  return 0;
}
