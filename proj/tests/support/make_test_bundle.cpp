// Writes a small synthetic bundle for the CLI tests: make_test_bundle OUT [cora]
// With "cora", the bundle is a 7-class, 1433-feature stand-in named cora-mini.
#include <iostream>
#include <string>

#include "support/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_test_bundle OUT [cora]\n";
    return 2;
  }
  synthetic::Spec spec;
  if (argc > 2 && std::string(argv[2]) == "cora") {
    spec.name = "cora-mini";
    spec.classes = 7;
    spec.per_class = 250;
    spec.features = 1433;
    spec.validation = 50;
    spec.test = 100;
  }
  segcn::write_bundle(synthetic::make_bundle(spec), argv[1]);
  return 0;
}
