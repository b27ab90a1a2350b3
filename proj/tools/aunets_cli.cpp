#include "aunets/cli/app.hpp"

int main(int argc, char** argv) { return aunets::cli::run(argc, argv); }
