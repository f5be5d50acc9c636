#include "cegcl/cli.hpp"

int main(int argc, char** argv) { return cegcl::run_command(argc, argv); }
