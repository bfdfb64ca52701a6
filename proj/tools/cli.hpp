#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hydat::cli {

/// Runs one `hydat` invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on a runtime error (one line on `err`:
/// `error: code=<code> message=<text>`) and 2 on a usage error.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace hydat::cli
