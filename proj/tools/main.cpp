#include <iostream>

#include "mmreg/cli.hpp"

int main(int argc, char** argv)
{
    return mmreg::cli::run(argc, argv, std::cout, std::cerr);
}
