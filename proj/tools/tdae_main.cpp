#include "scenario.hpp"

int main(int argc, char** argv) { return tdae::scenario::cli_main(argc, argv); }
