#include "rfolio/cli.hpp"

int main(int argc, char** argv) { return rfolio::run_cli(argc, argv); }
