// Regenerates the bundled synthetic corpus: make-fixture-corpus <dir>
#include <exception>
#include <iostream>

#include "fixture_corpus.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make-fixture-corpus <dir>\n";
    return 2;
  }
  try {
    alm_audit::testing::write_fixture_corpus(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "make-fixture-corpus: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
