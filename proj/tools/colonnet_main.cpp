#include "colonnet/cli.hpp"

int main(int argc, char** argv) { return colonnet::run_cli(argc, argv); }
