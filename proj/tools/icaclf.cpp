#include "icaclf/cli.hpp"

int main(int argc, char** argv) { return icaclf::run_cli(argc, argv); }
