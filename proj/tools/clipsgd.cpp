#include "clipsgd/cli.hpp"

int main(int argc, char** argv) { return clipsgd::run_cli(argc, argv); }
