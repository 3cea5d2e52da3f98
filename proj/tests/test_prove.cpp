// Runs the fast property suites (the same checks behind `didnet prove`).
#include <cstdio>
#include <iostream>

#include "didnet/prove.hpp"

int main() {
  const bool ok = didnet::prove_all(std::cout);
  if (!ok) {
    std::cout << "property suites FAILED\n";
    return 1;
  }
  std::cout << "all property suites passed\n";
  return 0;
}
