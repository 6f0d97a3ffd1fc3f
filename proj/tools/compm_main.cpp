#include <iostream>

#include "compm/app/commands.hpp"

int main(int argc, char** argv) { return compm::app::run_cli(argc, argv, std::cout); }
