#include "carbonsum/cli.hpp"

int main(int argc, char** argv) {
    return carbonsum::run_cli(argc, argv);
}
