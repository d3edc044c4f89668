#include <cstdio>

int main() {
  std::printf("trisplat: CLI under construction\n");
  return 0;
}
