#include "greybox/cli.h"

int main(int argc, char** argv) { return greybox::cli_dispatch(argc, argv); }
