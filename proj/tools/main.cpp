#include "hjhom/cli.hpp"

int main(int argc, char** argv) { return hjhom::run_cli(argc, argv); }
