#include "vaxpulse/report.hpp"

int main(int argc, char** argv) { return vaxpulse::report::run(argc, argv); }
