#include <qcl/cli.hpp>

int main(int argc, char** argv)
{
    return qcl::cli::parse_and_dispatch(argc, argv);
}
