#include <cstdio>

int main(int argc, char** argv) {
  // placeholder until the harness CLI lands
  (void)argc;
  (void)argv;
  std::fprintf(stderr, "gridnav: not wired up yet\n");
  return 2;
}
