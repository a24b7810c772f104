#include "cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return endonoise::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
