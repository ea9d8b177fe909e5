#include "scagc/cli.hpp"

int main(int argc, char** argv) { return scagc::run_cli(argc, argv); }
