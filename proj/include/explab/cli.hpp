#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace explab::cli {

// Exit codes: 0 success (warnings allowed), 1 flagged failure under --strict,
// 2 bad usage or input.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace explab::cli
