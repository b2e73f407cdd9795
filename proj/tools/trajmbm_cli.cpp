#include "trajmbm/cli.hpp"

int main(int argc, char** argv) { return trajmbm::cli::run(argc, argv); }
