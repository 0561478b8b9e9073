#include "hotpool/cli.hpp"

int main(int argc, char** argv) { return hotpool::cli_main(argc, argv); }
