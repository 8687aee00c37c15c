#include <iostream>

#include "fzoo/cli.h"

int main(int argc, char** argv) { return fzoo::dispatch(argc, argv, std::cout, std::cerr); }
