#include <iostream>

#include "enrt/cli.hpp"

int main(int argc, char** argv) {
    return enrt::cli::cli_main(argc, argv, std::cout, std::cerr);
}
