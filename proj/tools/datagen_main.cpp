#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ge2ae/synth_data.hpp"

// Emits procedural 10-class image sets in the cifar10-bin record layout, for
// environments without the real dataset on disk.
int main(int argc, char** argv) {
  CLI::App app{"ge2ae-datagen: synthetic cifar10-bin image sets"};
  std::string out_dir = ".";
  int train_count = 5000, test_count = 2000;
  std::uint64_t seed = 1;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--train", train_count, "training record count");
  app.add_option("--test", test_count, "test record count");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    ge2ae::data::write_synthetic_cifar(out_dir + "/data_batch_1.bin", train_count, seed);
    ge2ae::data::write_synthetic_cifar(out_dir + "/test_batch.bin", test_count, seed + 1);
    std::cout << "wrote " << train_count << " train and " << test_count << " test records under "
              << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
