#include "precal/commands.hpp"

int main(int argc, char** argv) { return precal::cli::run_cli(argc, argv); }
