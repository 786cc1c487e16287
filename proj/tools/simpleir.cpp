#include "simpleir/cli/dispatch.hpp"

int main(int argc, char** argv) { return simpleir::cli::dispatch(argc, argv); }
