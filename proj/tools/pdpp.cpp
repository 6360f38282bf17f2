#include "pdpp/cli.hpp"

int main(int argc, char** argv) { return pdpp::run_cli(argc, argv); }
