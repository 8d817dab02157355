#include <cstdio>

int main() {
  std::puts("emofuse: CLI under construction");
  return 0;
}
