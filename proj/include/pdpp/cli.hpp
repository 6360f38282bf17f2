#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdpp {

// Entry point for the `pdpp` binary: ingest | init-alpha | evaluate |
// rerank-file | serve. Returns the process exit status; diagnostics go to
// `err`, tables and summaries to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace pdpp
