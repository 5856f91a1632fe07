#include <vector>
#include <string>

#include "sadepth/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return sadepth::cli::run(args);
}
