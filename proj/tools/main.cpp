#include "repoctx/cli.hpp"

int main(int argc, char** argv) {
    return repoctx::dispatch(argc, argv);
}
