#include <iostream>
#include <string>

#include "elliptorus/harness.hpp"
#include "elliptorus/model.hpp"

// Writes a built-in model (toy, planar, normal_form) in the model file format.
int main(int argc, char** argv) {
  const std::string name = argc > 1 ? argv[1] : "toy";
  try {
    elliptorus::write_model(std::cout, elliptorus::resolve_model(name));
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 4;
  }
  return 0;
}
