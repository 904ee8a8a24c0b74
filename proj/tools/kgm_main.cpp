#include "kgm/cli.hpp"

int main(int argc, char** argv) { return kgm::run(argc, argv); }
