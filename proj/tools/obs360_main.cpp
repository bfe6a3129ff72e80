#include "obs360/io.hpp"

int main(int argc, char** argv) { return obs360::run_cli(argc, argv); }
