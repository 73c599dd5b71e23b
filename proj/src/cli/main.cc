#include "sprl/cli/commands.h"

int main(int argc, char** argv) { return sprl::cli::run_cli(argc, argv); }
