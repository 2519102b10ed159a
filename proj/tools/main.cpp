#include <iostream>

#include "hybridpay/cli.hpp"

int main(int argc, char** argv)
{
    return hybridpay::cli::run(argc, argv, std::cout, std::cerr);
}
