#include "balw_cli/cli.hpp"

int main(int argc, char** argv) { return balw::cli::Main(argc, argv); }
