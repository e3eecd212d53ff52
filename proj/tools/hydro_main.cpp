#include "hydro/harness.hpp"
#include "oracles.hpp"

int main(int argc, char** argv) { return hydro::cli(argc, argv, hydro::oracle::run); }
